/**
 * @file scenario.cpp
 * @brief Zone presets and the INI scenario loader.
 */

#include "irrig/scenario.hpp"

#include "irrig/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <map>
#include <set>

namespace irrig {

namespace {

struct Preset {
    const char* name;
    VanGenuchtenParams phi;
    double fc, wp, u_min_mm, u_max_mm;
};

// Retention curves fitted so that theta(-3.3 m) = FC and theta(-150 m) = WP.
constexpr Preset kPresets[] = {
    {"MZ1", {3.0e-6, 0.40, 0.04, 1.017, 1.299}, 0.28, 0.12, 4.0, 52.0},
    {"MZ2", {2.0e-6, 0.43, 0.06, 1.201, 1.350}, 0.28, 0.12, 4.3, 59.6},
    {"MZ3", {1.5e-6, 0.45, 0.08, 1.934, 1.270}, 0.30, 0.16, 5.0, 62.3},
};

namespace pt = boost::property_tree;

double get_double(const pt::ptree& sec, const std::string& key, double fallback) {
    const auto v = sec.get_optional<std::string>(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ValidationError("scenario: key '" + key + "' is not a number: " + *v);
    }
}

void check_keys(const pt::ptree& sec, const std::string& name, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : sec) {
        if (!value.empty()) throw ValidationError("scenario: nested entries in section [" + name + "]");
        if (!allowed.contains(key)) throw ValidationError("scenario: unknown key '" + key + "' in [" + name + "]");
    }
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace

std::vector<std::string> preset_zone_names() {
    std::vector<std::string> names;
    for (const auto& p : kPresets) names.emplace_back(p.name);
    return names;
}

ManagementZone preset_zone(const std::string& name, double mad) {
    for (const auto& p : kPresets) {
        if (name != p.name) continue;
        ManagementZone z;
        z.id = p.name;
        z.phi = p.phi;
        z.theta_fc = p.fc;
        z.theta_wp = p.wp;
        z.u_min = p.u_min_mm * 1e-3;
        z.u_max = p.u_max_mm * 1e-3;
        z.thresholds = thresholds_from_moisture(z.phi, z.theta_fc, target_zone(p.fc, p.wp, mad).lower, z.theta_wp);
        z.validate();
        return z;
    }
    throw ValidationError("unknown zone preset '" + name + "'");
}

int SeasonScenario::season_days() const { return static_cast<int>(days_between(start_date, end_date)) + 1; }

double SeasonScenario::rooting_depth(int day) const {
    return day < days_between(start_date, zr_switch_date) ? zr_shallow : zr_deep;
}

void SeasonScenario::validate() const {
    if (zones.empty()) throw ValidationError("scenario: no zones");
    std::set<std::string> ids;
    for (const auto& z : zones) {
        z.zone.validate();
        if (!ids.insert(z.zone.id).second) throw ValidationError("scenario: duplicate zone id " + z.zone.id);
        if (!(z.initial_theta > z.zone.phi.theta_r && z.initial_theta < z.zone.phi.theta_s))
            throw ValidationError("scenario: initial moisture of " + z.zone.id + " outside (theta_r, theta_s)");
    }
    if (season_days() < 1) throw ValidationError("scenario: season end precedes its start");
    const long sw = days_between(start_date, zr_switch_date);
    if (sw < 0 || sw >= season_days()) throw ValidationError("scenario: rooting-depth switch outside the season");
    if (!(zr_shallow > 0.0 && zr_deep > 0.0)) throw ValidationError("scenario: rooting depths must be positive");
    for (const auto& z : zones)
        if (zr_deep > z.zone.grid.depth() || zr_shallow > z.zone.grid.depth())
            throw ValidationError("scenario: rooting depth below the soil column");
    scheduler.validate();
    ekf.validate();
    if (sensor_noise_sd < 0.0 || process_noise_sd < 0.0) throw ValidationError("scenario: negative noise level");
    if (forecast_noise.et0_sd_per_lead < 0.0 || forecast_noise.rain_sd_per_lead < 0.0)
        throw ValidationError("scenario: negative forecast noise");
    if (trigger_lookahead < 0) throw ValidationError("scenario: negative trigger lookahead");
    if (!(ym >= 0.0 && ky >= 0.0)) throw ValidationError("scenario: ym and ky must be nonnegative");
}

SeasonScenario load_scenario(const std::string& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError("scenario: " + std::string(e.what()));
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    SeasonScenario s;
    const pt::ptree empty;
    auto section = [&](const std::string& name) -> const pt::ptree& {
        const auto it = tree.find(name);
        return it == tree.not_found() ? empty : it->second;
    };

    const auto& season = section("season");
    check_keys(season, "season", {"weather", "start", "end", "zr_switch", "zr_shallow", "zr_deep", "seed",
                                  "sensor_noise_sd", "process_noise_sd", "trigger_lookahead"});
    s.weather_path = resolve(base, season.get<std::string>("weather", ""));
    s.start_date = season.get<std::string>("start", s.start_date);
    s.end_date = season.get<std::string>("end", s.end_date);
    s.zr_switch_date = season.get<std::string>("zr_switch", s.zr_switch_date);
    s.zr_shallow = get_double(season, "zr_shallow", s.zr_shallow);
    s.zr_deep = get_double(season, "zr_deep", s.zr_deep);
    s.seed = static_cast<std::uint64_t>(get_double(season, "seed", static_cast<double>(s.seed)));
    s.sensor_noise_sd = get_double(season, "sensor_noise_sd", s.sensor_noise_sd);
    s.process_noise_sd = get_double(season, "process_noise_sd", s.process_noise_sd);
    s.trigger_lookahead = static_cast<int>(get_double(season, "trigger_lookahead", s.trigger_lookahead));

    const auto& sch = section("scheduler");
    check_keys(sch, "scheduler", {"horizon", "q_upper", "q_lower", "r_c", "r_u", "mad", "gap", "time_limit"});
    s.scheduler.horizon = static_cast<int>(get_double(sch, "horizon", s.scheduler.horizon));
    s.scheduler.q_upper = get_double(sch, "q_upper", s.scheduler.q_upper);
    s.scheduler.q_lower = get_double(sch, "q_lower", s.scheduler.q_lower);
    s.scheduler.r_c = get_double(sch, "r_c", s.scheduler.r_c);
    s.scheduler.r_u = get_double(sch, "r_u", s.scheduler.r_u);
    s.scheduler.mad = get_double(sch, "mad", s.scheduler.mad);
    s.scheduler.relative_gap = get_double(sch, "gap", s.scheduler.relative_gap);
    s.scheduler.time_limit = get_double(sch, "time_limit", s.scheduler.time_limit);

    const auto& fc = section("forecast");
    check_keys(fc, "forecast", {"et0_sd_per_lead", "rain_sd_per_lead"});
    s.forecast_noise.et0_sd_per_lead = get_double(fc, "et0_sd_per_lead", s.forecast_noise.et0_sd_per_lead);
    s.forecast_noise.rain_sd_per_lead = get_double(fc, "rain_sd_per_lead", s.forecast_noise.rain_sd_per_lead);

    const auto& ekf = section("ekf");
    check_keys(ekf, "ekf", {"q", "r", "p0", "observation_scale", "psi_bias"});
    s.ekf.q = get_double(ekf, "q", s.ekf.q);
    s.ekf.r = get_double(ekf, "r", s.ekf.r);
    s.ekf.p0 = get_double(ekf, "p0", s.ekf.p0);
    s.ekf.observation_scale = get_double(ekf, "observation_scale", s.ekf.observation_scale);
    s.ekf_psi_bias = get_double(ekf, "psi_bias", s.ekf_psi_bias);

    const auto& crop = section("crop");
    check_keys(crop, "crop", {"t_base", "ym", "ky"});
    s.t_base = get_double(crop, "t_base", s.t_base);
    s.ym = get_double(crop, "ym", s.ym);
    s.ky = get_double(crop, "ky", s.ky);

    const std::set<std::string> zone_keys{"preset", "ks", "theta_s", "theta_r", "alpha", "n",
                                          "theta_fc", "theta_wp", "u_min_mm", "u_max_mm", "initial_theta",
                                          "network", "evaporation_fraction", "bottom"};
    for (const auto& [name, sec] : tree) {
        if (name == "season" || name == "scheduler" || name == "forecast" || name == "ekf" || name == "crop") continue;
        if (name.rfind("zone.", 0) != 0 || name.size() <= 5)
            throw ValidationError("scenario: unknown section [" + name + "]");
        check_keys(sec, name, zone_keys);
        ZoneSetup zs;
        const std::string id = name.substr(5);
        const auto preset = sec.get_optional<std::string>("preset");
        if (preset) {
            zs.zone = preset_zone(*preset, s.scheduler.mad);
        } else {
            for (const char* k : {"ks", "theta_s", "theta_r", "alpha", "n", "theta_fc", "theta_wp", "u_min_mm", "u_max_mm"})
                if (!sec.get_optional<std::string>(k))
                    throw ValidationError("scenario: zone " + id + " needs '" + k + "' or a preset");
        }
        auto& z = zs.zone;
        z.id = id;
        z.phi.ks = get_double(sec, "ks", z.phi.ks);
        z.phi.theta_s = get_double(sec, "theta_s", z.phi.theta_s);
        z.phi.theta_r = get_double(sec, "theta_r", z.phi.theta_r);
        z.phi.alpha = get_double(sec, "alpha", z.phi.alpha);
        z.phi.n = get_double(sec, "n", z.phi.n);
        z.theta_fc = get_double(sec, "theta_fc", z.theta_fc);
        z.theta_wp = get_double(sec, "theta_wp", z.theta_wp);
        z.u_min = get_double(sec, "u_min_mm", z.u_min * 1e3) * 1e-3;
        z.u_max = get_double(sec, "u_max_mm", z.u_max * 1e3) * 1e-3;
        z.evaporation_fraction = get_double(sec, "evaporation_fraction", z.evaporation_fraction);
        const std::string bottom = sec.get<std::string>("bottom", "free_drainage");
        if (bottom == "free_drainage") z.bottom = BottomBoundary::FreeDrainage;
        else if (bottom == "no_flux") z.bottom = BottomBoundary::NoFlux;
        else throw ValidationError("scenario: zone " + id + " bottom must be free_drainage or no_flux");
        z.phi.validate();
        if (!(z.theta_wp < z.theta_fc)) throw ValidationError("scenario: zone " + id + " needs theta_wp < theta_fc");
        z.thresholds = thresholds_from_moisture(z.phi, z.theta_fc,
                                                target_zone(z.theta_fc, z.theta_wp, s.scheduler.mad).lower, z.theta_wp);
        zs.initial_theta = get_double(sec, "initial_theta", z.theta_fc);
        zs.network_path = resolve(base, sec.get<std::string>("network", ""));
        s.zones.push_back(std::move(zs));
    }
    try {
        s.validate();
    } catch (const DomainError& e) {
        throw ValidationError(std::string("scenario: ") + e.what());
    }
    return s;
}

}  // namespace irrig
