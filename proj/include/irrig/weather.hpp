/**
 * @file weather.hpp
 * @brief Daily weather tables, CSV ingestion, a synthetic generator and forecast noise.
 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace irrig {

struct WeatherDay {
    std::string date;     ///< YYYY-MM-DD
    double et0_mm = 0.0;  ///< reference evapotranspiration (mm/day)
    double rain_mm = 0.0;
    double tavg_c = 0.0;
};

using WeatherTable = std::vector<WeatherDay>;

/// Header of the weather CSV format.
inline constexpr const char* kWeatherHeader = "date,et0_mm_day,rain_mm,tavg_c";

/// Reads a daily weather CSV. Dates must be consecutive; ET0 and rain nonnegative.
/// Errors name the offending line.
WeatherTable load_weather_csv(const std::string& path);
void write_weather_csv(const std::string& path, const WeatherTable& table);

/// Day after the given YYYY-MM-DD date; throws on malformed dates.
std::string next_date(const std::string& date);
/// Whole days from a to b (b - a).
long days_between(const std::string& a, const std::string& b);

/// Growing-season weather from seasonal sinusoids plus seeded noise:
/// ET0 peaks in mid July, rain arrives as sparse showers.
WeatherTable synthetic_weather(const std::string& start_date, int days, std::uint64_t seed);

/// Forecast error standard deviations grow linearly with lead day (1-based).
struct ForecastNoise {
    double et0_sd_per_lead = 0.3;   ///< mm/day per lead day
    double rain_sd_per_lead = 0.5;  ///< mm per lead day
};

/// Adds N(0, (lead * sd)^2) noise to ET0 and rain of a truth window, clipping
/// at zero. Temperature is passed through unchanged.
WeatherTable perturb_forecast(std::span<const WeatherDay> truth, const ForecastNoise& noise, std::uint64_t seed);

}  // namespace irrig
