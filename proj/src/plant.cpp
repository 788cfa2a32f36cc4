#include "nafstab/plant.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace nafstab {

namespace {

std::map<std::string, StepFn>& registry() {
    static std::map<std::string, StepFn> r = {
        {"pendulum",
         [](const PlantSpec& spec, std::span<const double> x, std::span<const double> a,
            std::vector<double>& xn) {
             const double x1 = x[0], x2 = x[1];
             xn.resize(2);
             xn[0] = x1 + spec.dt * x2;
             xn[1] = x2 + spec.dt * (spec.gravity * std::sin(x1) - spec.xi[0] * x2 + spec.xi[1] * a[0]);
         }},
    };
    return r;
}

}  // namespace

bool Box::contains(std::span<const double> v) const {
    if (v.size() != lo.size()) return false;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] < lo[i] || v[i] > hi[i]) return false;
    return true;
}

void register_dynamics(const std::string& id, StepFn fn) { registry()[id] = std::move(fn); }

void step_into(const PlantSpec& spec, std::span<const double> x, std::span<const double> a,
               std::vector<double>& x_next) {
    if (static_cast<int>(x.size()) != spec.state_dim) throw std::invalid_argument("step: state length mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("step: non-finite state");
    if (!spec.action_box.contains(a)) throw std::invalid_argument("step: action outside box (clip first)");
    const auto it = registry().find(spec.dynamics);
    if (it == registry().end()) throw std::invalid_argument("step: unknown dynamics id: " + spec.dynamics);
    it->second(spec, x, a, x_next);
}

std::vector<double> step(const PlantSpec& spec, std::span<const double> x, std::span<const double> a) {
    std::vector<double> xn;
    step_into(spec, x, a, xn);
    return xn;
}

double reward(const RewardSpec& rs, std::span<const double> x, std::span<const double> a) {
    if (static_cast<int>(x.size()) != rs.r1.rows() || static_cast<int>(a.size()) != rs.r2.rows())
        throw std::invalid_argument("reward: shape mismatch");
    static thread_local std::vector<double> dx;
    dx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] - rs.target[i];
    return -quad_form(rs.r1, dx) - quad_form(rs.r2, a);
}

std::vector<double> clip_action(const Box& box, std::span<const double> a) {
    std::vector<double> out(a.begin(), a.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], box.lo[i], box.hi[i]);
    return out;
}

bool ParamRegion::contains(std::span<const double> xi) const {
    if (xi.size() != intervals.size()) return false;
    for (std::size_t i = 0; i < xi.size(); ++i)
        if (xi[i] < intervals[i][0] || xi[i] > intervals[i][1]) return false;
    return true;
}

std::vector<double> schedule_xi(const XiSchedule& profile, int k) {
    const double frac = profile.ramp_steps <= 0
                            ? 1.0
                            : std::min(1.0, std::max(0.0, static_cast<double>(k) / profile.ramp_steps));
    return {profile.xi1, profile.xi2_from + (profile.xi2_to - profile.xi2_from) * frac};
}

}  // namespace nafstab
