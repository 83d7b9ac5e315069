/**
 * @file crop_metrics.cpp
 */

#include "irrig/crop_metrics.hpp"

#include "irrig/error.hpp"

#include <algorithm>

namespace irrig {

double CropCoeffModel::raw(double g) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * g + *it;
    return acc;
}

void YieldModel::validate() const {
    if (!(theta_vw <= theta_v2 && theta_v2 <= theta_v3 && theta_v3 <= theta_v1))
        throw DomainError("yield model: need theta_vw <= theta_v2 <= theta_v3 <= theta_v1");
    if (ym < 0.0 || ky < 0.0) throw DomainError("yield model: Ym and ky must be nonnegative");
}

std::vector<double> gdd_accumulate(std::span<const double> t_avg, double t_base) {
    if (t_avg.empty()) throw DomainError("gdd_accumulate: empty temperature series");
    std::vector<double> g(t_avg.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < t_avg.size(); ++i) {
        acc += std::max(0.0, t_avg[i] - t_base);
        g[i] = acc;
    }
    return g;
}

double crop_coefficient(double g, const CropCoeffModel& model) {
    if (g < 0.0) throw DomainError("crop_coefficient: negative degree days");
    return std::max(0.0, model.raw(g));
}

double stress_factor(double theta_v, const YieldModel& m) {
    if (theta_v >= m.theta_v1) return 0.0;
    if (theta_v > m.theta_v3) return (theta_v - m.theta_v1) / (m.theta_v3 - m.theta_v1);
    if (theta_v >= m.theta_v2) return 1.0;
    if (theta_v > m.theta_vw) return (theta_v - m.theta_vw) / (m.theta_v2 - m.theta_vw);
    return 0.0;
}

double predicted_yield(double etc, double etm, const YieldModel& model) {
    if (!(etm > 0.0)) throw DomainError("predicted_yield: ETm must be positive");
    if (etc < 0.0 || etc > etm * (1.0 + 1e-12))
        throw DomainError("predicted_yield: need 0 <= ETc <= ETm");
    return model.ym * (1.0 - model.ky + model.ky * etc / etm);
}

void SeasonalEvapotranspiration::add_day(double theta_rz, double kc, double et0, const YieldModel& model) {
    const double etm_day = kc * et0;
    etm_ += etm_day;
    etc_ += stress_factor(theta_rz, model) * etm_day;
}

double iwue(double ya, double total_irrigation) {
    if (!(total_irrigation > 0.0)) throw DomainError("iwue: total irrigation must be positive");
    return ya / total_irrigation;
}

}  // namespace irrig
