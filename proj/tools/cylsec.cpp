// Command-line front end: verification suites, reduced-trajectory CSV
// export, and section-measure reports with optional raster dumps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cylsec/cylsec.hpp"

namespace {

using namespace cylsec;

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

double rnd(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

CheckResult check_translation3(const ScaleParams& p) {
    Section3Map map(p, FlowSpec{1e-10, 1e-10, 0.25});
    const RegionFamily& fam = map.family();
    double worst = 0.0;
    for (int i = 1; i <= p.k; ++i) {
        const Rect2 r = fam.R_pprime(i);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const PhasePoint z{r.umin + (a + 0.5) * (r.umax - r.umin) / 4,
                                   r.vmin + (b + 0.5) * (r.vmax - r.vmin) / 4,
                                   0.37, 0.25 + 0.5 * a / 4.0};
                const PhasePoint w = map(z);
                const PhasePoint want{z.u, z.v, z.x, z.y + i * (1.0 + p.eps)};
                worst = std::max({worst, std::abs(w.u - want.u), std::abs(w.v - want.v),
                                  std::abs(w.x - want.x), std::abs(w.y - want.y)});
            }
    }
    return {"translation", worst < 1e-6, "max deviation " + std::to_string(worst)};
}

CheckResult check_translation4(const ScaleParams& p) {
    Section4Map map(p, FlowSpec{1e-10, 1e-10, 0.25});
    const RegionFamily& fam = map.family();
    double worst = 0.0;
    for (int i = 1; i <= p.k; ++i) {
        const Rect2 r = fam.R_pprime(i);
        const Interval xi = fam.I_pprime(i, 0);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                const PhasePoint z{r.umin + (a + 0.5) * (r.umax - r.umin) / 3,
                                   r.vmin + (b + 0.5) * (r.vmax - r.vmin) / 3,
                                   xi.lo + (a + 0.5) * xi.length() / 3,
                                   0.2 + 0.2 * b};
                const PhasePoint w = map(z);
                const PhasePoint want{z.u, z.v, z.x, z.y + 2.0 * i};
                worst = std::max({worst, std::abs(w.u - want.u), std::abs(w.v - want.v),
                                  std::abs(w.x - want.x), std::abs(w.y - want.y)});
            }
    }
    return {"translation", worst < 1e-5, "max deviation " + std::to_string(worst)};
}

CheckResult check_fixing(const ScaleParams& p, bool section4) {
    const RegionFamily fam(p);
    int bad = 0, total = 0;
    if (!section4) {
        Section3Map map(p);
        for (int i = 1; i <= p.k; ++i)
            for (int s = 0; s < 25; ++s) {
                // frame of R_i between the outer edge and the cutoff support
                const double t = s / 25.0;
                const PhasePoint z{fam.u_shift(i) + 0.5 * p.delta, t, -1.0 + 2.0 * t,
                                   3.0 * t - 1.0};
                ++total;
                if (!(map(z) == z)) ++bad;
            }
    } else {
        Section4Map map(p);
        for (int i = 1; i <= p.k; ++i)
            for (int s = 0; s < 13; ++s) {
                const double t = (s + 0.5) / 13.0;
                const PhasePoint za{fam.u_shift(i) + 0.5 * p.delta, t,
                                    fam.x_shift(i, 0) + 0.3 * p.eps, t};
                const PhasePoint zj{fam.u_shift(i) + 0.5 * p.eps, 0.5,
                                    fam.x_shift(i, 0) + 0.5 * p.delta, t};
                total += 2;
                if (!(map(za) == za)) ++bad;
                if (!(map(zj) == zj)) ++bad;
            }
    }
    return {"fixing", bad == 0,
            std::to_string(bad) + " of " + std::to_string(total) + " points moved"};
}

CheckResult check_tstar(const ScaleParams& p) {
    const RegionFamily fam(p);
    const int i = 1;
    const double c = 2.0 * i - 1.0 - p.eps;
    const double tstar = (p.delta / c) * std::log((p.eps - p.delta) / p.delta);
    const double x0 = p.eps - p.delta, y0 = fam.y_check(i) + p.nu;
    const auto traj = reduced_trajectory(p, i, x0, y0, FlowSpec{1e-10, 1e-10, 0.25},
                                         0.0, tstar, 200);
    const PhasePoint& end = traj.z.back();
    const double ex = p.delta, ey = fam.y_check(i) + p.delta - p.nu;
    const double err = std::hypot(end.x - ex, end.y - ey);
    return {"tstar", err < 1e-3, "endpoint distance " + std::to_string(err)};
}

CheckResult check_energy(const ScaleParams& p) {
    const double norm = energy_norm(build_F(p), 32);
    const double bound = (1.0 + p.eps) * (p.eps - p.delta);
    // the analytic majorant exceeds 2 eps when eps > 1 (k < 4); the norm
    // itself must satisfy both bounds at every k
    const bool ok = norm <= bound + 1e-12 && norm <= 2.0 * p.eps + 1e-12;
    std::ostringstream os;
    os << "norm " << norm << " bound " << bound << " 2eps " << 2.0 * p.eps;
    return {"energy", ok, os.str()};
}

CheckResult check_symplectic(const ScaleParams& p, bool section4, uint64_t seed) {
    std::mt19937_64 rng(seed);
    const RegionFamily fam(p);
    const FlowSpec spec{1e-10, 1e-10, 0.25};
    double worst = 0.0;
    const double hstep = 1e-5;
    if (!section4) {
        Section3Map map(p, spec);
        auto fn = [&map](const PhasePoint& z) { return map(z); };
        for (int s = 0; s < 100; ++s) {
            const PhasePoint z{rnd(rng, p.delta, std::numbers::pi - p.delta),
                               rnd(rng, p.delta, 1.0 - p.delta),
                               rnd(rng, -1.0, 1.0), rnd(rng, 0.0, 1.0)};
            worst = std::max(worst, symplecticity_defect(fn, z, hstep));
        }
    } else {
        Section4Map map(p, spec);
        auto fn = [&map](const PhasePoint& z) { return map(z); };
        for (int s = 0; s < 100; ++s) {
            const int i = 1 + static_cast<int>(rnd(rng, 0.0, p.k - 1e-9));
            const PhasePoint z{fam.u_shift(i) + rnd(rng, p.nu, p.eps - p.nu),
                               rnd(rng, p.nu, 1.0 - p.nu),
                               fam.x_shift(i, 0) + rnd(rng, 0.0, p.eps),
                               rnd(rng, 0.0, 1.0)};
            worst = std::max(worst, symplecticity_defect(fn, z, hstep));
        }
    }
    return {"symplectic", worst < 1e-4, "max defect " + std::to_string(worst)};
}

CheckResult check_sections(const ScaleParams& p, bool section4, const SigmaOptions& o) {
    const SigmaReport rep = section4 ? sigma_report_section4(p, o) : sigma_report_section3(p, o);
    const double slack = 1.05;
    bool ok;
    std::ostringstream os;
    if (!section4) {
        const double bound = 3.0 * p.eps * slack;
        ok = rep.p_run.sup_outer <= bound && rep.q_run.sup_hull <= bound;
        os << "sup_outer " << rep.p_run.sup_outer << " sup_hull " << rep.q_run.sup_hull
           << " bound " << bound;
    } else {
        const double bound = 4.0 * p.eps * slack;
        const double sbound = 6.0 * p.eps * slack;
        ok = rep.p_run.sup_outer <= bound && rep.q_run.sup_hull <= bound &&
             rep.sigma_upper <= sbound;
        os << "sup_outer " << rep.p_run.sup_outer << " sup_hull " << rep.q_run.sup_hull
           << " sigma_upper " << rep.sigma_upper << " bounds " << bound << "/" << sbound;
    }
    return {"sections", ok, os.str()};
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output path: " + path);
    os << text;
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explicit symplectomorphisms of R^4: verification and section measures"};
    app.require_subcommand(1);

    std::string construction = "section3";
    int k = 4;
    int grid_res = 1024;
    double density = 0.0;
    double slab_h = 0.0;
    std::string check_list;
    bool emit_raster = false;
    std::string out_path;
    uint64_t seed = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--construction", construction)
            ->check(CLI::IsMember({"section3", "section4"}));
        cmd->add_option("--k", k)->check(CLI::Range(2, 1 << 16));
        cmd->add_option("--grid", grid_res)->check(CLI::Range(16, 16384));
        cmd->add_option("--density", density, "uv samples per unit length (0 = auto)");
        cmd->add_option("--slab", slab_h, "slab thickness (0 = delta/2)");
        cmd->add_option("--out", out_path);
        cmd->add_option("--seed", seed);
    };

    CLI::App* verify = app.add_subcommand("verify", "run property checks; exit 0 iff all pass");
    add_common(verify);
    verify->add_option("--check", check_list, "comma-separated subset of checks");

    CLI::App* traj = app.add_subcommand("trajectory", "emit a reduced (x,y) trajectory as CSV");
    add_common(traj);
    int traj_i = 1, traj_samples = 400;
    double traj_x0 = std::nan(""), traj_y0 = std::nan(""), traj_t0 = 0.0, traj_t1 = 1.0;
    traj->add_option("--i", traj_i, "block index");
    traj->add_option("--x0", traj_x0, "start x (default eps - delta)");
    traj->add_option("--y0", traj_y0, "start y (default ramp start + nu)");
    traj->add_option("--t0", traj_t0);
    traj->add_option("--t1", traj_t1);
    traj->add_option("--samples", traj_samples)->check(CLI::Range(1, 1000000));

    CLI::App* report = app.add_subcommand("report", "emit a full section-measure JSON report");
    add_common(report);
    report->add_flag("--emit-raster", emit_raster, "write PGM rasters of the argmax slabs");

    CLI11_PARSE(app, argc, argv);

    try {
        const ScaleParams p = derive_scales(k);
        const bool s4 = construction == "section4";

        if (verify->parsed()) {
            SigmaOptions so;
            so.grid_res = grid_res;
            so.slab_h = slab_h;
            if (density > 0.0) so.uv_spacing = 1.0 / density;

            std::set<std::string> wanted;
            if (!check_list.empty()) {
                std::stringstream ss(check_list);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    if (tok == "P6") tok = "translation";  // accepted alias
                    wanted.insert(tok);
                }
            }
            auto enabled = [&](const std::string& name) {
                return wanted.empty() || wanted.count(name) > 0;
            };

            std::vector<CheckResult> results;
            if (enabled("translation"))
                results.push_back(s4 ? check_translation4(p) : check_translation3(p));
            if (enabled("fixing")) results.push_back(check_fixing(p, s4));
            if (s4 && enabled("tstar")) results.push_back(check_tstar(p));
            if (s4 && enabled("energy")) results.push_back(check_energy(p));
            if (enabled("symplectic")) results.push_back(check_symplectic(p, s4, seed));
            if (enabled("sections")) results.push_back(check_sections(p, s4, so));

            bool all = true;
            nlohmann::ordered_json j;
            j["schema"] = 1;
            j["command"] = "verify";
            j["construction"] = construction;
            j["k"] = k;
            auto arr = nlohmann::ordered_json::array();
            for (const auto& r : results) {
                all = all && r.pass;
                arr.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
            }
            j["checks"] = std::move(arr);
            j["pass"] = all;
            write_text(out_path, j.dump(2) + "\n");
            return all ? 0 : 1;
        }

        if (traj->parsed()) {
            if (traj_i < 1 || traj_i > k) throw std::runtime_error("--i out of range");
            const RegionFamily fam(p);
            const double x0 = std::isnan(traj_x0) ? p.eps - p.delta : traj_x0;
            const double y0 = std::isnan(traj_y0) ? fam.y_check(traj_i) + p.nu : traj_y0;
            const Trajectory t = reduced_trajectory(p, traj_i, x0, y0,
                                                    FlowSpec{1e-10, 1e-10, 0.25},
                                                    traj_t0, traj_t1, traj_samples);
            std::ostringstream os;
            write_trajectory_csv(t, os);
            write_text(out_path, os.str());
            return 0;
        }

        if (report->parsed()) {
            SigmaOptions so;
            so.grid_res = grid_res;
            so.slab_h = slab_h;
            if (density > 0.0) so.uv_spacing = 1.0 / density;
            const double h = so.slab_h > 0.0 ? so.slab_h : p.delta / 2.0;
            const auto geo = cylsec::detail::sigma_geometry(so);
            const RegionFamily fam(p);

            SigmaReport rep;
            rep.scales = p;
            cylsec::detail::SlabTable ptab(h, so.max_points), qtab(h, so.max_points);
            if (s4) {
                cylsec::detail::sample_section4(p, fam, fam.P_nu(), so, geo, ptab);
                cylsec::detail::sample_section4(p, fam, fam.Q(), so, geo, qtab);
                rep.energy = energy_norm(build_F(p), 32);
            } else {
                cylsec::detail::sample_section3(p, fam, fam.P_prime(), so, geo, ptab);
                cylsec::detail::sample_section3(p, fam, fam.Q(), so, geo, qtab);
                rep.energy = 0.0;
            }
            rep.p_run = cylsec::detail::measure_slab_table(ptab, geo.bounds, so.grid_res,
                                                           geo.fine_dil, geo.coarse_dil, false);
            rep.q_run = cylsec::detail::measure_slab_table(qtab, geo.bounds, so.grid_res,
                                                           geo.fine_dil, geo.coarse_dil, true);
            rep.sigma_upper = rep.p_run.sup_outer + rep.energy;
            rep.sigma_hat_upper = rep.q_run.sup_hull + rep.energy;

            write_text(out_path, to_json(rep, construction).dump(2) + "\n");
            if (emit_raster) {
                const std::string stem = out_path.empty() ? std::string("cylsec_report")
                                                          : out_path;
                cylsec::detail::SlabRenderer pr(ptab, geo.bounds, so.grid_res,
                                                geo.fine_dil, geo.coarse_dil);
                write_pgm(pr.render(rep.p_run.argmax_outer_ix, rep.p_run.argmax_outer_iy),
                          stem + ".p_outer.pgm");
                cylsec::detail::SlabRenderer qr(qtab, geo.bounds, so.grid_res,
                                                geo.fine_dil, geo.coarse_dil);
                write_pgm(qr.render(rep.q_run.argmax_hull_ix, rep.q_run.argmax_hull_iy),
                          stem + ".q_hull.pgm");
            }
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 2;
}
