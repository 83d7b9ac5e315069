/**
 * @file scenario.hpp
 * @brief Season scenarios: zone presets and the INI scenario format.
 *
 * Scenario files are flat INI documents with the sections [season],
 * [scheduler], [forecast], [ekf], [crop] and one [zone.<id>] per management
 * zone. Unknown sections or keys are errors. Relative paths are resolved
 * against the directory of the scenario file.
 */

#pragma once

#include "irrig/estimation.hpp"
#include "irrig/field_model.hpp"
#include "irrig/scheduler.hpp"
#include "irrig/weather.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace irrig {

/// Names of the bundled synthetic zones: "MZ1" (sandy loam), "MZ2" (loam),
/// "MZ3" (clay loam).
std::vector<std::string> preset_zone_names();

/// Bundled zone with its Feddes band placed on the MAD target zone.
ManagementZone preset_zone(const std::string& name, double mad = 0.5);

struct ZoneSetup {
    ManagementZone zone;
    double initial_theta = 0.0;  ///< uniform starting moisture of the plant
    std::string network_path;    ///< surrogate for the mpc-relu strategy (may be empty)
};

struct SeasonScenario {
    std::vector<ZoneSetup> zones;
    std::string weather_path;
    std::string start_date = "2023-05-05";
    std::string end_date = "2023-09-04";    ///< inclusive
    std::string zr_switch_date = "2023-07-15";  ///< first day at the deep rooting depth
    double zr_shallow = 0.5;
    double zr_deep = 1.0;
    SchedulerConfig scheduler;
    ForecastNoise forecast_noise;
    EKFNoise ekf;
    double ekf_psi_bias = 0.0;       ///< offset of the filter's initial guess (m)
    double sensor_noise_sd = 0.0008;
    double process_noise_sd = 5e-4;
    int trigger_lookahead = 4;       ///< forecast days of rain credited by the triggered arm
    double t_base = 5.0;
    double ym = 0.8;
    double ky = 1.0;
    std::uint64_t seed = 2023;

    int season_days() const;
    /// Rooting depth on a season day (0-based).
    double rooting_depth(int day) const;
    void validate() const;
};

SeasonScenario load_scenario(const std::string& path);

}  // namespace irrig
