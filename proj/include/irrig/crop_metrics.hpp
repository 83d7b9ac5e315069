/**
 * @file crop_metrics.hpp
 * @brief Crop coefficient from growing-degree days, water-stress yield and IWUE.
 */

#pragma once

#include <array>
#include <span>
#include <vector>

namespace irrig {

/// Quartic K_c(g) of cumulative growing-degree days, clamped at zero.
struct CropCoeffModel {
    double t_base = 5.0;
    /// Ascending powers of g.
    std::array<double, 5> coefficients{-0.0207, 0.00266, 4.7e-8, -2.0e-9, 2.70e-13};

    /// Unclamped polynomial value (Horner).
    double raw(double g) const;
};

struct YieldModel {
    double ym = 0.8;  ///< maximum potential yield (kg/m2)
    double ky = 1.0;  ///< yield response factor (-)
    double theta_v1 = 0.0;  ///< anaerobic point
    double theta_v2 = 0.0;  ///< lower end of optimal uptake
    double theta_v3 = 0.0;  ///< upper end of optimal uptake
    double theta_vw = 0.0;  ///< wilting point

    void validate() const;
};

/// Cumulative sum of max(0, T_avg - T_base).
std::vector<double> gdd_accumulate(std::span<const double> t_avg, double t_base = 5.0);

double crop_coefficient(double g, const CropCoeffModel& model = {});

/// Piecewise-linear water stress factor in [0, 1].
double stress_factor(double theta_v, const YieldModel& model);

/// Ya = Ym [1 - ky + ky ETc / ETm].
double predicted_yield(double etc, double etm, const YieldModel& model);

/// Running ETc / ETm totals over a season.
class SeasonalEvapotranspiration {
public:
    /// Adds one day: ETm = Kc ET0, ETc = K(theta) ETm.
    void add_day(double theta_rz, double kc, double et0, const YieldModel& model);
    double etc() const { return etc_; }
    double etm() const { return etm_; }

private:
    double etc_ = 0.0;
    double etm_ = 0.0;
};

/// Yield per unit irrigation (kg/m3).
double iwue(double ya, double total_irrigation);

}  // namespace irrig
