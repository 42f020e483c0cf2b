#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cylsec/cutoffs.hpp"
#include "cylsec/flow.hpp"
#include "cylsec/geometry.hpp"
#include "cylsec/hamiltonians.hpp"
#include "cylsec/phase.hpp"

namespace cylsec {

/// Rectangular product set base x x_window x y_window in (u,v,x,y).
struct ProductSet {
    Rect2 base;
    Interval x_window;
    Interval y_window;

    double volume() const {
        return base.area() * x_window.length() * y_window.length();
    }
};

struct SampleBudgetError : std::runtime_error {
    explicit SampleBudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Occupancy bitmap over a (u,v) rectangle. Cells are marked by discs and
/// rectangle fills; occupied area discretizes the outer measure of the
/// marked set.
class RasterGrid {
public:
    RasterGrid(const Rect2& bounds, int res) : b_(bounds), res_(res) {
        if (res < 4) throw std::invalid_argument("RasterGrid: res must be >= 4");
        if (!(bounds.umax > bounds.umin && bounds.vmax > bounds.vmin))
            throw std::invalid_argument("RasterGrid: degenerate bounds");
        cw_ = (b_.umax - b_.umin) / res_;
        ch_ = (b_.vmax - b_.vmin) / res_;
        occ_.assign(static_cast<std::size_t>(res_) * res_, 0);
    }

    int res() const { return res_; }
    const Rect2& bounds() const { return b_; }
    double cell_w() const { return cw_; }
    double cell_h() const { return ch_; }
    double cell_area() const { return cw_ * ch_; }

    void clear() { std::fill(occ_.begin(), occ_.end(), 0); }

    /// Copy occupancy from a grid with identical geometry.
    void copy_from(const RasterGrid& other) {
        if (other.res_ != res_)
            throw std::invalid_argument("RasterGrid::copy_from: resolution mismatch");
        occ_ = other.occ_;
    }

    bool occupied(int cu, int cv) const {
        return occ_[static_cast<std::size_t>(cv) * res_ + cu] != 0;
    }

    /// Mark every cell whose closed extent meets the closed disc of radius
    /// r around (u, v).
    void mark_disc(double u, double v, double r) {
        const int cu0 = std::max(0, cell_u(u - r));
        const int cu1 = std::min(res_ - 1, cell_u(u + r));
        const int cv0 = std::max(0, cell_v(v - r));
        const int cv1 = std::min(res_ - 1, cell_v(v + r));
        const double r2 = r * r;
        for (int cv = cv0; cv <= cv1; ++cv) {
            const double vlo = b_.vmin + cv * ch_;
            const double dv = v < vlo ? vlo - v : (v > vlo + ch_ ? v - (vlo + ch_) : 0.0);
            uint8_t* row = occ_.data() + static_cast<std::size_t>(cv) * res_;
            for (int cu = cu0; cu <= cu1; ++cu) {
                const double ulo = b_.umin + cu * cw_;
                const double du = u < ulo ? ulo - u : (u > ulo + cw_ ? u - (ulo + cw_) : 0.0);
                if (du * du + dv * dv <= r2) row[cu] = 1;
            }
        }
    }

    /// Mark every cell meeting the closed rectangle.
    void fill_rect(const Rect2& r) {
        const int cu0 = std::max(0, cell_u(r.umin));
        const int cu1 = std::min(res_ - 1, cell_u(r.umax));
        const int cv0 = std::max(0, cell_v(r.vmin));
        const int cv1 = std::min(res_ - 1, cell_v(r.vmax));
        if (cu1 < cu0 || cv1 < cv0) return;
        for (int cv = cv0; cv <= cv1; ++cv) {
            uint8_t* row = occ_.data() + static_cast<std::size_t>(cv) * res_;
            std::fill(row + cu0, row + cu1 + 1, uint8_t{1});
        }
    }

    long long occupied_count() const {
        long long n = 0;
        for (uint8_t c : occ_) n += c;
        return n;
    }

    double occupied_area() const { return occupied_count() * cell_area(); }

    /// World-coordinate bounding box of the occupied cells, if any.
    std::optional<Rect2> occupied_bbox() const {
        int cu0 = res_, cu1 = -1, cv0 = res_, cv1 = -1;
        for (int cv = 0; cv < res_; ++cv) {
            const uint8_t* row = occ_.data() + static_cast<std::size_t>(cv) * res_;
            for (int cu = 0; cu < res_; ++cu) {
                if (!row[cu]) continue;
                cu0 = std::min(cu0, cu);
                cu1 = std::max(cu1, cu);
                cv0 = std::min(cv0, cv);
                cv1 = std::max(cv1, cv);
            }
        }
        if (cu1 < 0) return std::nullopt;
        return Rect2{b_.umin + cu0 * cw_, b_.umin + (cu1 + 1) * cw_,
                     b_.vmin + cv0 * ch_, b_.vmin + (cv1 + 1) * ch_};
    }

    bool boundary_touched() const {
        const int n = res_;
        for (int cu = 0; cu < n; ++cu)
            if (occupied(cu, 0) || occupied(cu, n - 1)) return true;
        for (int cv = 0; cv < n; ++cv)
            if (occupied(0, cv) || occupied(n - 1, cv)) return true;
        return false;
    }

    const std::vector<uint8_t>& cells() const { return occ_; }

private:
    int cell_u(double u) const { return static_cast<int>(std::floor((u - b_.umin) / cw_)); }
    int cell_v(double v) const { return static_cast<int>(std::floor((v - b_.vmin) / ch_)); }

    Rect2 b_;
    int res_;
    double cw_, ch_;
    std::vector<uint8_t> occ_;
};

/// Area of the simply connected hull of the occupied set: the occupied
/// cells plus all cells not reachable from the grid boundary through free
/// cells (4-connectivity). Requires one free boundary ring.
inline double simply_connected_hull(const RasterGrid& g) {
    if (g.boundary_touched())
        throw std::runtime_error("simply_connected_hull: occupancy touches grid boundary; enlarge bounds");
    const int n = g.res();
    std::vector<uint8_t> seen(static_cast<std::size_t>(n) * n, 0);
    std::vector<int> stack;
    stack.reserve(4 * n);
    auto push = [&](int cu, int cv) {
        const std::size_t idx = static_cast<std::size_t>(cv) * n + cu;
        if (seen[idx] || g.cells()[idx]) return;
        seen[idx] = 1;
        stack.push_back(cv * n + cu);
    };
    for (int cu = 0; cu < n; ++cu) {
        push(cu, 0);
        push(cu, n - 1);
    }
    for (int cv = 0; cv < n; ++cv) {
        push(0, cv);
        push(n - 1, cv);
    }
    long long exterior = static_cast<long long>(stack.size());
    while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int cu = p % n, cv = p / n;
        const std::size_t before = stack.size();
        if (cu > 0) push(cu - 1, cv);
        if (cu < n - 1) push(cu + 1, cv);
        if (cv > 0) push(cu, cv - 1);
        if (cv < n - 1) push(cu, cv + 1);
        exterior += static_cast<long long>(stack.size() - before);
    }
    const long long hull_cells = static_cast<long long>(n) * n - exterior;
    return hull_cells * g.cell_area();
}

/// Deterministic stratified sample of S pushed through `map`.
template <typename Map>
std::vector<PhasePoint> pushforward_sample(Map&& map, const ProductSet& S, double density,
                                           long long cap = 50'000'000) {
    if (!(density > 0.0)) throw std::invalid_argument("pushforward_sample: density must be > 0");
    auto count = [density](double len) {
        return std::max(1LL, static_cast<long long>(std::ceil(len * density)));
    };
    const long long nu = count(S.base.umax - S.base.umin);
    const long long nv = count(S.base.vmax - S.base.vmin);
    const long long nx = count(S.x_window.length());
    const long long ny = count(S.y_window.length());
    const long long total = nu * nv * nx * ny;
    if (total > cap)
        throw SampleBudgetError("pushforward_sample: " + std::to_string(total) +
                                " samples exceed cap " + std::to_string(cap));
    std::vector<PhasePoint> out;
    out.reserve(static_cast<std::size_t>(total));
    auto coord = [](double lo, double len, long long n, long long s) {
        return lo + (s + 0.5) * len / n;
    };
    for (long long a = 0; a < nu; ++a)
        for (long long b = 0; b < nv; ++b)
            for (long long c = 0; c < nx; ++c)
                for (long long d = 0; d < ny; ++d)
                    out.push_back(map(PhasePoint{
                        coord(S.base.umin, S.base.umax - S.base.umin, nu, a),
                        coord(S.base.vmin, S.base.vmax - S.base.vmin, nv, b),
                        coord(S.x_window.lo, S.x_window.length(), nx, c),
                        coord(S.y_window.lo, S.y_window.length(), ny, d)}));
    return out;
}

struct SlabMeasure {
    int ix = 0, iy = 0;
    double outer = 0.0;
    double hull = 0.0;       // upper bound when !hull_exact
    bool hull_exact = false;
    long long cells = 0;
};

struct SectionReport {
    double slab_h = 0.0;
    int grid_res = 0;
    double dilation = 0.0;
    std::vector<SlabMeasure> slabs;
    double sup_outer = 0.0, sup_hull = 0.0;
    int argmax_outer_ix = 0, argmax_outer_iy = 0;
    int argmax_hull_ix = 0, argmax_hull_iy = 0;
};

namespace detail {

inline int64_t slab_key(int ix, int iy) {
    return (static_cast<int64_t>(ix) << 32) ^ static_cast<int64_t>(static_cast<uint32_t>(iy));
}

/// Per-slab content accumulated by the samplers. Points come in two
/// dilation tiers; columns replicate one (u,v) point across a contiguous
/// iy range; rect ids reference exact rectangles rendered without
/// dilation; a global fixed point set applies to a product range of slabs.
class SlabTable {
public:
    struct Slab {
        std::vector<std::pair<float, float>> fine, coarse;
        std::vector<uint16_t> rects;
    };
    struct Column {
        int iy_lo, iy_hi;
        float u, v;
        bool fine_tier;
    };

    explicit SlabTable(double slab_h, long long cap) : h_(slab_h), cap_(cap) {}

    double slab_h() const { return h_; }
    int index(double t) const { return static_cast<int>(std::floor(t / h_)); }

    uint16_t add_rect(const Rect2& r) {
        rect_table_.push_back(r);
        return static_cast<uint16_t>(rect_table_.size() - 1);
    }
    const std::vector<Rect2>& rect_table() const { return rect_table_; }

    void emit_fine(int ix, int iy, double u, double v) {
        charge(1);
        slabs_[slab_key(ix, iy)].fine.emplace_back(static_cast<float>(u), static_cast<float>(v));
    }
    void emit_coarse(int ix, int iy, double u, double v) {
        charge(1);
        slabs_[slab_key(ix, iy)].coarse.emplace_back(static_cast<float>(u), static_cast<float>(v));
    }
    void emit_rect(int ix, int iy, uint16_t rid) {
        auto& rs = slabs_[slab_key(ix, iy)].rects;
        if (std::find(rs.begin(), rs.end(), rid) == rs.end()) {
            charge(1);
            rs.push_back(rid);
        }
    }
    void add_column(int ix, int iy_lo, int iy_hi, double u, double v, bool fine_tier) {
        if (iy_hi < iy_lo) return;
        charge(1);
        columns_[ix].push_back({iy_lo, iy_hi, static_cast<float>(u), static_cast<float>(v), fine_tier});
    }
    void set_global_fixed(std::vector<std::pair<float, float>> pts,
                          int ix_lo, int ix_hi, int iy_lo, int iy_hi) {
        charge(static_cast<long long>(pts.size()));
        fixed_pts_ = std::move(pts);
        fixed_ix_ = {ix_lo, ix_hi};
        fixed_iy_ = {iy_lo, iy_hi};
    }

    const std::unordered_map<int64_t, Slab>& slabs() const { return slabs_; }
    const std::unordered_map<int, std::vector<Column>>& columns() const { return columns_; }
    const std::vector<std::pair<float, float>>& fixed_pts() const { return fixed_pts_; }
    std::pair<int, int> fixed_ix() const { return fixed_ix_; }
    std::pair<int, int> fixed_iy() const { return fixed_iy_; }

private:
    void charge(long long n) {
        emitted_ += n;
        if (emitted_ > cap_)
            throw SampleBudgetError("slab sampling exceeded the configured point budget");
    }

    double h_;
    long long cap_, emitted_ = 0;
    std::unordered_map<int64_t, Slab> slabs_;
    std::unordered_map<int, std::vector<Column>> columns_;
    std::vector<std::pair<float, float>> fixed_pts_;
    std::pair<int, int> fixed_ix_{0, -1}, fixed_iy_{0, -1};
    std::vector<Rect2> rect_table_;
};

/// Renders any single slab of a table into a reusable raster; the fixed
/// point set is rasterized once and copied in.
class SlabRenderer {
public:
    SlabRenderer(const SlabTable& tab, const Rect2& bounds, int grid_res,
                 double fine_dil, double coarse_dil)
        : tab_(tab), fine_dil_(fine_dil), coarse_dil_(coarse_dil),
          work_(bounds, grid_res), fixed_(bounds, grid_res) {
        if (!tab.fixed_pts().empty()) {
            for (const auto& [u, v] : tab.fixed_pts()) fixed_.mark_disc(u, v, fine_dil_);
            have_fixed_ = true;
        }
    }

    const RasterGrid& render(int ix, int iy) {
        const bool fixed_here = have_fixed_ &&
                                ix >= tab_.fixed_ix().first && ix <= tab_.fixed_ix().second &&
                                iy >= tab_.fixed_iy().first && iy <= tab_.fixed_iy().second;
        if (fixed_here)
            work_.copy_from(fixed_);
        else
            work_.clear();
        const auto sit = tab_.slabs().find(slab_key(ix, iy));
        if (sit != tab_.slabs().end()) {
            for (const auto& [u, v] : sit->second.fine) work_.mark_disc(u, v, fine_dil_);
            for (const auto& [u, v] : sit->second.coarse) work_.mark_disc(u, v, coarse_dil_);
            for (uint16_t rid : sit->second.rects) work_.fill_rect(tab_.rect_table()[rid]);
        }
        const auto cit = tab_.columns().find(ix);
        if (cit != tab_.columns().end())
            for (const auto& c : cit->second)
                if (iy >= c.iy_lo && iy <= c.iy_hi)
                    work_.mark_disc(c.u, c.v, c.fine_tier ? fine_dil_ : coarse_dil_);
        return work_;
    }

private:
    const SlabTable& tab_;
    double fine_dil_, coarse_dil_;
    RasterGrid work_, fixed_;
    bool have_fixed_ = false;
};

/// Render every slab of the table and take measures. Hull flood fills are
/// skipped (and replaced by the bbox upper bound) whenever the bbox cannot
/// beat the running sup; the reported sup_hull is exact.
inline SectionReport measure_slab_table(const SlabTable& tab, const Rect2& bounds, int grid_res,
                                        double fine_dil, double coarse_dil, bool with_hull) {
    SectionReport rep;
    rep.slab_h = tab.slab_h();
    rep.grid_res = grid_res;
    rep.dilation = fine_dil;

    std::map<int, std::vector<int>> iy_by_ix;  // sorted for determinism
    for (const auto& [key, slab] : tab.slabs()) {
        (void)slab;
        iy_by_ix[static_cast<int>(key >> 32)].push_back(static_cast<int>(static_cast<uint32_t>(key)));
    }
    for (const auto& [ix, cols] : tab.columns())
        for (const auto& c : cols)
            for (int iy = c.iy_lo; iy <= c.iy_hi; ++iy) iy_by_ix[ix].push_back(iy);
    if (!tab.fixed_pts().empty())
        for (int ix = tab.fixed_ix().first; ix <= tab.fixed_ix().second; ++ix)
            for (int iy = tab.fixed_iy().first; iy <= tab.fixed_iy().second; ++iy)
                iy_by_ix[ix].push_back(iy);

    SlabRenderer renderer(tab, bounds, grid_res, fine_dil, coarse_dil);

    for (auto& [ix, iys] : iy_by_ix) {
        std::sort(iys.begin(), iys.end());
        iys.erase(std::unique(iys.begin(), iys.end()), iys.end());
        for (int iy : iys) {
            const RasterGrid& work = renderer.render(ix, iy);

            SlabMeasure m;
            m.ix = ix;
            m.iy = iy;
            m.cells = work.occupied_count();
            m.outer = m.cells * work.cell_area();
            if (with_hull) {
                const auto bbox = work.occupied_bbox();
                const double bbox_area = bbox ? bbox->area() : 0.0;
                if (bbox_area > rep.sup_hull) {
                    m.hull = simply_connected_hull(work);
                    m.hull_exact = true;
                } else {
                    m.hull = bbox_area;
                    m.hull_exact = false;
                }
            }
            if (m.outer > rep.sup_outer) {
                rep.sup_outer = m.outer;
                rep.argmax_outer_ix = ix;
                rep.argmax_outer_iy = iy;
            }
            if (with_hull && m.hull_exact && m.hull > rep.sup_hull) {
                rep.sup_hull = m.hull;
                rep.argmax_hull_ix = ix;
                rep.argmax_hull_iy = iy;
            }
            rep.slabs.push_back(m);
        }
    }
    return rep;
}

}  // namespace detail

/// Bin an explicit point cloud into (x,y) slabs and measure each slab's
/// (u,v) section. Every slab's hull is computed exactly; intended for
/// oracle-sized clouds.
inline SectionReport slab_measures(const std::vector<PhasePoint>& cloud, double slab_h,
                                   int grid_res, double dilation, bool with_hull = true) {
    SectionReport rep;
    rep.slab_h = slab_h;
    rep.grid_res = grid_res;
    rep.dilation = dilation;
    if (cloud.empty()) return rep;
    if (!(slab_h > 0.0)) throw std::invalid_argument("slab_measures: slab_h must be > 0");

    double ulo = kInf, uhi = -kInf, vlo = kInf, vhi = -kInf;
    for (const auto& z : cloud) {
        ulo = std::min(ulo, z.u);
        uhi = std::max(uhi, z.u);
        vlo = std::min(vlo, z.v);
        vhi = std::max(vhi, z.v);
    }
    const double pad = 3.0 * dilation + 4.0 * std::max(uhi - ulo, vhi - vlo) / grid_res + 1e-9;
    const Rect2 bounds{ulo - pad, uhi + pad, vlo - pad, vhi + pad};

    std::map<int64_t, std::vector<std::pair<float, float>>> bins;
    auto idx = [slab_h](double t) { return static_cast<int>(std::floor(t / slab_h)); };
    for (const auto& z : cloud)
        bins[detail::slab_key(idx(z.x), idx(z.y))].emplace_back(static_cast<float>(z.u),
                                                                static_cast<float>(z.v));
    RasterGrid work(bounds, grid_res);
    for (const auto& [key, pts] : bins) {
        work.clear();
        for (const auto& [u, v] : pts) work.mark_disc(u, v, dilation);
        SlabMeasure m;
        m.ix = static_cast<int>(key >> 32);
        m.iy = static_cast<int>(static_cast<uint32_t>(key));
        m.cells = work.occupied_count();
        m.outer = m.cells * work.cell_area();
        if (with_hull) {
            m.hull = simply_connected_hull(work);
            m.hull_exact = true;
        }
        if (m.outer > rep.sup_outer) {
            rep.sup_outer = m.outer;
            rep.argmax_outer_ix = m.ix;
            rep.argmax_outer_iy = m.iy;
        }
        if (m.hull > rep.sup_hull) {
            rep.sup_hull = m.hull;
            rep.argmax_hull_ix = m.ix;
            rep.argmax_hull_iy = m.iy;
        }
        rep.slabs.push_back(m);
    }
    return rep;
}

/// Compression of R x R into R x (0,1): (x, y) -> (x / f'(y), f(y)) with f
/// the logistic function. Area-preserving, so measures of sections are
/// unchanged; available for mapping unbounded-y sets into a bounded window.
inline std::pair<double, double> beta_map(double x, double y) {
    const double f = 1.0 / (1.0 + std::exp(-y));
    const double fp = f * (1.0 - f);
    return {x / fp, f};
}

struct SigmaOptions {
    int grid_res = 1024;
    double slab_h = 0.0;      // 0: delta / 2
    double uv_spacing = 0.0;  // 0: 2x the larger raster cell extent
    double dilation = 0.0;    // 0: equal to uv_spacing
    bool p_set = true;        // measure the P-type set (sup_outer)
    bool q_set = true;        // measure the Q-type set (sup_hull)
    bool with_hull = true;
    long long max_points = 80'000'000;
    FlowSpec flow{1e-8, 1e-8, 0.25};
};

struct SigmaReport {
    ScaleParams scales;
    SectionReport p_run, q_run;
    double energy = 0.0;
    double sigma_upper = 0.0;      // p_run.sup_outer + energy
    double sigma_hat_upper = 0.0;  // q_run.sup_hull + energy
};

namespace detail {

struct SigmaGeometry {
    Rect2 bounds;
    double fine_dil, coarse_dil, fine_sp, coarse_sp;
};

inline SigmaGeometry sigma_geometry(const SigmaOptions& o) {
    SigmaGeometry g;
    const double pad = 0.05;
    g.bounds = {-pad, std::numbers::pi + pad, -pad, 1.0 + pad};
    const double cell = std::max((g.bounds.umax - g.bounds.umin) / o.grid_res,
                                 (g.bounds.vmax - g.bounds.vmin) / o.grid_res);
    g.fine_sp = o.uv_spacing > 0.0 ? o.uv_spacing : 2.0 * cell;
    g.fine_dil = o.dilation > 0.0 ? o.dilation : g.fine_sp;
    g.coarse_sp = 2.0 * g.fine_sp;
    g.coarse_dil = 0.75 * g.coarse_sp;
    return g;
}

template <typename F>
void for_grid(const Rect2& r, double sp, F&& f) {
    const int nu = std::max(1, static_cast<int>(std::ceil((r.umax - r.umin) / sp)));
    const int nv = std::max(1, static_cast<int>(std::ceil((r.vmax - r.vmin) / sp)));
    for (int a = 0; a < nu; ++a)
        for (int b = 0; b < nv; ++b)
            f(r.umin + (a + 0.5) * (r.umax - r.umin) / nu,
              r.vmin + (b + 0.5) * (r.vmax - r.vmin) / nv);
}

/// Sample the section-3 time-1 map over base x {one x slab} x [0,1].
/// The field preserves x and is independent of y, so each (u,v,x) source
/// needs one reduced (u,v,dy) integration replicated across the y grid;
/// plateau blocks translate rigidly and are rendered as exact rectangles.
inline void sample_section3(const ScaleParams& p, const RegionFamily& fam, const Rect2& base,
                            const SigmaOptions& o, const SigmaGeometry& g, SlabTable& tab) {
    const double e = p.eps, d = p.delta;
    const int k = p.k;
    const PlateauCutoff f1(d, 2.0 * d, e - 2.0 * d, e - d);
    const PlateauCutoff f2(d, 2.0 * d, 1.0 - 2.0 * d, 1.0 - d);
    const double h = tab.slab_h();

    const int ix0 = tab.index(0.5);
    const double xlo = ix0 * h;
    const double x0s[2] = {xlo + 0.25 * h, xlo + 0.75 * h};
    const int iy1 = tab.index(1.0 - 1e-9);

    auto S = [&](double u) {
        double s = 0.0;
        for (int i = 1; i <= k; ++i) s += i * f1(u - (i - 1) * e);
        return s;
    };
    auto Sp = [&](double u) {
        double s = 0.0;
        for (int i = 1; i <= k; ++i) s += i * f1.deriv(u - (i - 1) * e);
        return s;
    };

    std::vector<std::pair<float, float>> fixed;
    const double c = 1.0 + e;
    for_grid(base, g.fine_sp, [&](double u, double v) {
        const int i = static_cast<int>(std::floor(u / e)) + 1;
        const double ul = u - (i - 1) * e;
        const bool in_support = i >= 1 && i <= k && ul > d && ul < e - d && v > d && v < 1.0 - d;
        if (!in_support) {
            fixed.emplace_back(static_cast<float>(u), static_cast<float>(v));
            return;
        }
        if (ul >= 2.0 * d && ul <= e - 2.0 * d && v >= 2.0 * d && v <= 1.0 - 2.0 * d)
            return;  // plateau, rendered as a rectangle below
        for (double x0 : x0s) {
            auto field = [&](const std::array<double, 3>& w) {
                return std::array<double, 3>{-S(w[0]) * f2.deriv(w[1]) * c * x0,
                                             Sp(w[0]) * f2(w[1]) * c * x0,
                                             S(w[0]) * f2(w[1]) * c};
            };
            const auto r = rk45<3>(field, {u, v, 0.0}, 0.0, 1.0, o.flow);
            tab.add_column(ix0, tab.index(r[2]), tab.index(1.0 + r[2]), r[0], r[1], true);
        }
    });
    tab.set_global_fixed(std::move(fixed), ix0, ix0, 0, iy1);

    for (int i = 1; i <= k; ++i) {
        const Rect2 rpp = fam.R_pprime(i);
        const Rect2 clip{std::max(rpp.umin, base.umin), std::min(rpp.umax, base.umax),
                         std::max(rpp.vmin, base.vmin), std::min(rpp.vmax, base.vmax)};
        if (clip.umin >= clip.umax || clip.vmin >= clip.vmax) continue;
        const uint16_t rid = tab.add_rect(clip);
        const double dy = i * (1.0 + e);
        for (int iy = tab.index(dy); iy <= tab.index(1.0 + dy); ++iy)
            tab.emit_rect(ix0, iy, rid);
    }
}

/// Sample the section-4 global time-1 map over base x window x [0,1].
/// For y <= 1 the map is phi_G o phi_F per support cell; phi_F preserves x
/// and splits into a planar (u,v) flow plus a y shift, and phi_G reduces to
/// the planar (x,y) system on the g1 g2 plateau. Plateau (u,v) rectangles
/// move rigidly; annulus points get one (u,v,dy) integration each plus
/// cached planar flows on a quantized yF grid.
inline void sample_section4(const ScaleParams& p, const RegionFamily& fam, const Rect2& base,
                            const SigmaOptions& o, const SigmaGeometry& g, SlabTable& tab) {
    const double e = p.eps, d = p.delta, n = p.nu;
    const int k = p.k;
    const PlateauCutoff f1(d, 2.0 * d, e - 2.0 * d, e - d);
    const PlateauCutoff f2(d, 2.0 * d, 1.0 - 2.0 * d, 1.0 - d);
    const PlateauCutoff f3(d, 2.0 * d, e - 2.0 * d, e - d);
    const PlateauCutoff g3(0.0, d, e - d, e);
    const double h = tab.slab_h();
    const double hq = h / 4.0;  // planar-flow quantization step
    const int iy1 = tab.index(1.0 - 1e-9);

    const double win_lo = -2.0 * d, win_hi = e + 2.0 * d;
    const int ix_lo = tab.index(win_lo), ix_hi = tab.index(win_hi - 1e-12);

    // x-independent (u,v) classification
    std::vector<std::pair<float, float>> fixed_all;
    std::vector<std::vector<std::pair<float, float>>> annulus(static_cast<std::size_t>(k) + 1);
    std::vector<Rect2> plat_clip(static_cast<std::size_t>(k) + 1);
    std::vector<bool> plat_ok(static_cast<std::size_t>(k) + 1, false);

    auto block_of = [&](double u, double v) -> int {
        const int i = static_cast<int>(std::floor(u / e)) + 1;
        if (i < 1 || i > k) return 0;
        const double ul = u - (i - 1) * e;
        if (ul > d && ul < e - d && v > d && v < 1.0 - d) return i;  // interior of R'
        return 0;
    };
    for_grid(base, g.fine_sp, [&](double u, double v) {
        if (block_of(u, v) == 0)
            fixed_all.emplace_back(static_cast<float>(u), static_cast<float>(v));
    });
    for_grid(base, g.coarse_sp, [&](double u, double v) {
        const int i = block_of(u, v);
        if (i == 0) return;
        const double ul = u - (i - 1) * e;
        if (ul >= 2.0 * d && ul <= e - 2.0 * d && v >= 2.0 * d && v <= 1.0 - 2.0 * d)
            return;  // plateau
        annulus[static_cast<std::size_t>(i)].emplace_back(static_cast<float>(u),
                                                          static_cast<float>(v));
    });
    for (int i = 1; i <= k; ++i) {
        const Rect2 rpp = fam.R_pprime(i);
        const Rect2 clip{std::max(rpp.umin, base.umin), std::min(rpp.umax, base.umax),
                         std::max(rpp.vmin, base.vmin), std::min(rpp.vmax, base.vmax)};
        if (clip.umin < clip.umax && clip.vmin < clip.vmax) {
            plat_clip[static_cast<std::size_t>(i)] = clip;
            plat_ok[static_cast<std::size_t>(i)] = true;
        }
    }
    std::vector<uint16_t> plat_rid(static_cast<std::size_t>(k) + 1, 0);
    for (int i = 1; i <= k; ++i)
        if (plat_ok[static_cast<std::size_t>(i)])
            plat_rid[static_cast<std::size_t>(i)] = tab.add_rect(plat_clip[static_cast<std::size_t>(i)]);

    tab.set_global_fixed(std::move(fixed_all), ix_lo, ix_hi, 0, iy1);

    // planar (x,y) flow of block i from (xl, yF), cached on the quantized
    // yF grid per (i, x0-sample, yF-index)
    std::unordered_map<uint64_t, std::pair<double, double>> planar_cache;
    auto planar = [&](int i, int x0_id, double xl, int64_t kq) -> std::pair<double, double> {
        const uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(i)) << 56) ^
                             (static_cast<uint64_t>(static_cast<uint32_t>(x0_id)) << 32) ^
                             static_cast<uint64_t>(static_cast<uint32_t>(static_cast<int32_t>(kq)));
        auto it = planar_cache.find(key);
        if (it != planar_cache.end()) return it->second;
        const double ci = 2.0 * i - 1.0 - e;
        const RampCutoff g4(fam.y_check(i), d, n);
        auto field = [&](const std::array<double, 2>& s) {
            return std::array<double, 2>{ci * (-g3(s[0]) * g4.deriv(s[1]) * s[0]),
                                         ci * (g3.deriv(s[0]) * s[0] + g3(s[0])) * g4(s[1])};
        };
        const double yF = kq * hq;
        std::pair<double, double> out;
        if (yF <= fam.y_check(i)) {
            out = {xl, yF};
        } else {
            const auto r = rk45<2>(field, {xl, yF}, 0.0, 1.0, o.flow);
            out = {r[0], r[1]};
        }
        planar_cache.emplace(key, out);
        return out;
    };

    int x0_id = 0;
    for (int ix = ix_lo; ix <= ix_hi; ++ix) {
        for (int s = 0; s < 2; ++s, ++x0_id) {
            const double x0 = std::clamp((ix + (s == 0 ? 0.25 : 0.75)) * h, win_lo, win_hi);
            for (int i = 1; i <= k; ++i) {
                double xl = x0 - 4.0 * (i - 1) * d;
                xl -= e * std::floor(xl / e);
                const double shift = x0 - xl;
                const double f3v = f3(xl);
                const double yc = fam.y_check(i);
                if (f3v == 0.0) {
                    // F inactive for this block at this x; everything with
                    // y in [0,1] is fixed (the G ramp starts above 1)
                    if (plat_ok[static_cast<std::size_t>(i)])
                        for (int iy = 0; iy <= iy1; ++iy)
                            tab.emit_rect(ix, iy, plat_rid[static_cast<std::size_t>(i)]);
                    for (const auto& [u, v] : annulus[static_cast<std::size_t>(i)])
                        tab.add_column(ix, 0, iy1, u, v, false);
                    continue;
                }
                const double mF = (1.0 + e) * (f3.deriv(xl) * xl + f3v);
                const double W = (1.0 + e) * f3v * xl;

                if (plat_ok[static_cast<std::size_t>(i)]) {
                    // rigid plateau: dy under F is exactly mF
                    const int64_t k0 = static_cast<int64_t>(std::ceil(mF / hq));
                    const int64_t k1 = static_cast<int64_t>(std::floor((1.0 + mF) / hq));
                    for (int64_t kq = k0; kq <= k1; ++kq) {
                        const double yF = kq * hq;
                        if (yF <= yc) {
                            tab.emit_rect(ix, tab.index(yF), plat_rid[static_cast<std::size_t>(i)]);
                        } else {
                            const auto [x2, y2] = planar(i, x0_id, xl, kq);
                            tab.emit_rect(tab.index(x2 + shift), tab.index(y2),
                                          plat_rid[static_cast<std::size_t>(i)]);
                        }
                    }
                }
                for (const auto& [u0, v0] : annulus[static_cast<std::size_t>(i)]) {
                    auto field = [&](const std::array<double, 3>& w) {
                        return std::array<double, 3>{-f1(w[0]) * f2.deriv(w[1]) * W,
                                                     f1.deriv(w[0]) * f2(w[1]) * W,
                                                     f1(w[0]) * f2(w[1]) * mF};
                    };
                    const auto r = rk45<3>(field, {u0, v0, 0.0}, 0.0, 1.0, o.flow);
                    const double dy = r[2];
                    const double yF_hi = 1.0 + dy;
                    if (dy < yc)
                        tab.add_column(ix, tab.index(dy), tab.index(std::min(yF_hi, yc)),
                                       r[0], r[1], false);
                    if (yF_hi > yc) {
                        // quantized to every 4th planar-grid node (step h)
                        int64_t k0 = static_cast<int64_t>(std::ceil(std::max(yc, dy) / h));
                        const int64_t k1 = static_cast<int64_t>(std::floor(yF_hi / h));
                        for (int64_t kq = k0; kq <= k1; ++kq) {
                            const auto [x2, y2] = planar(i, x0_id, xl, 4 * kq);
                            tab.emit_coarse(tab.index(x2 + shift), tab.index(y2), r[0], r[1]);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Upper-bound report for the section-3 construction: sup over (x,y) slabs
/// of the measured section areas of the images of the P'- and Q-type sets.
/// No energy bound is claimed for this construction; energy reports as 0.
inline SigmaReport sigma_report_section3(const ScaleParams& p, const SigmaOptions& o = {}) {
    RegionFamily fam(p);
    SigmaReport rep;
    rep.scales = p;
    const double h = o.slab_h > 0.0 ? o.slab_h : p.delta / 2.0;
    const auto g = detail::sigma_geometry(o);
    if (o.p_set) {
        detail::SlabTable tab(h, o.max_points);
        detail::sample_section3(p, fam, fam.P_prime(), o, g, tab);
        rep.p_run = detail::measure_slab_table(tab, g.bounds, o.grid_res, g.fine_dil,
                                               g.coarse_dil, false);
    }
    if (o.q_set) {
        detail::SlabTable tab(h, o.max_points);
        detail::sample_section3(p, fam, fam.Q(), o, g, tab);
        rep.q_run = detail::measure_slab_table(tab, g.bounds, o.grid_res, g.fine_dil,
                                               g.coarse_dil, o.with_hull);
    }
    rep.energy = 0.0;
    rep.sigma_upper = rep.p_run.sup_outer + rep.energy;
    rep.sigma_hat_upper = rep.q_run.sup_hull + rep.energy;
    return rep;
}

/// Upper-bound report for the section-4 construction; energy is the
/// sampled norm of the generating function (each cell's generator has the
/// same range, and supports are disjoint).
inline SigmaReport sigma_report_section4(const ScaleParams& p, const SigmaOptions& o = {}) {
    RegionFamily fam(p);
    SigmaReport rep;
    rep.scales = p;
    const double h = o.slab_h > 0.0 ? o.slab_h : p.delta / 2.0;
    const auto g = detail::sigma_geometry(o);
    if (o.p_set) {
        detail::SlabTable tab(h, o.max_points);
        detail::sample_section4(p, fam, fam.P_nu(), o, g, tab);
        rep.p_run = detail::measure_slab_table(tab, g.bounds, o.grid_res, g.fine_dil,
                                               g.coarse_dil, false);
    }
    if (o.q_set) {
        detail::SlabTable tab(h, o.max_points);
        detail::sample_section4(p, fam, fam.Q(), o, g, tab);
        rep.q_run = detail::measure_slab_table(tab, g.bounds, o.grid_res, g.fine_dil,
                                               g.coarse_dil, o.with_hull);
    }
    rep.energy = energy_norm(build_F(p), 32);
    rep.sigma_upper = rep.p_run.sup_outer + rep.energy;
    rep.sigma_hat_upper = rep.q_run.sup_hull + rep.energy;
    return rep;
}

}  // namespace cylsec
