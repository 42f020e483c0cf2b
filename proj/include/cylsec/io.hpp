#pragma once

#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cylsec/flow.hpp"
#include "cylsec/sections.hpp"

namespace cylsec {

/// CSV rows `t,u,v,x,y`, one per trajectory sample.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t,u,v,x,y\n";
    os.precision(17);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& z = traj.z[i];
        os << traj.t[i] << ',' << z.u << ',' << z.v << ',' << z.x << ',' << z.y << '\n';
    }
}

/// Binary PGM (P5, maxval 255); occupied cells white, row 0 at the top
/// edge corresponds to the largest v.
inline void write_pgm(const RasterGrid& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    const int n = g.res();
    os << "P5\n" << n << ' ' << n << "\n255\n";
    std::string row(static_cast<std::size_t>(n), '\0');
    for (int cv = n - 1; cv >= 0; --cv) {
        for (int cu = 0; cu < n; ++cu)
            row[static_cast<std::size_t>(cu)] = g.occupied(cu, cv) ? char(255) : char(0);
        os.write(row.data(), n);
    }
    if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

inline nlohmann::ordered_json to_json(const SectionReport& r, bool include_slabs = true) {
    nlohmann::ordered_json j;
    j["slab_h"] = r.slab_h;
    j["grid_res"] = r.grid_res;
    j["dilation"] = r.dilation;
    j["sup_outer"] = r.sup_outer;
    j["sup_hull"] = r.sup_hull;
    j["argmax_outer"] = {r.argmax_outer_ix, r.argmax_outer_iy};
    j["argmax_hull"] = {r.argmax_hull_ix, r.argmax_hull_iy};
    j["n_slabs"] = r.slabs.size();
    if (include_slabs) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& s : r.slabs) {
            nlohmann::ordered_json e;
            e["ix"] = s.ix;
            e["iy"] = s.iy;
            e["outer"] = s.outer;
            e["hull"] = s.hull;
            e["hull_exact"] = s.hull_exact;
            arr.push_back(std::move(e));
        }
        j["slabs"] = std::move(arr);
    }
    return j;
}

inline nlohmann::ordered_json to_json(const SigmaReport& r, const std::string& construction,
                                      bool include_slabs = false) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["construction"] = construction;
    j["k"] = r.scales.k;
    j["eps"] = r.scales.eps;
    j["delta"] = r.scales.delta;
    j["nu"] = r.scales.nu;
    j["energy"] = r.energy;
    j["sup_outer"] = r.p_run.sup_outer;
    j["sup_hull"] = r.q_run.sup_hull;
    j["sigma_upper"] = r.sigma_upper;
    j["sigma_hat_upper"] = r.sigma_hat_upper;
    j["p_run"] = to_json(r.p_run, include_slabs);
    j["q_run"] = to_json(r.q_run, include_slabs);
    return j;
}

}  // namespace cylsec
