/**
 * @file weather.cpp
 */

#include "irrig/weather.hpp"

#include "irrig/error.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace irrig {

namespace {

std::chrono::sys_days parse_date(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw ValidationError("malformed date '" + s + "'");
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        const auto* b = s.data() + pos;
        auto res = std::from_chars(b, b + len, out);
        if (res.ec != std::errc() || res.ptr != b + len) throw ValidationError("malformed date '" + s + "'");
    };
    field(0, 4, y);
    field(5, 2, m);
    field(8, 2, d);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ValidationError("invalid date '" + s + "'");
    return std::chrono::sys_days{ymd};
}

std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    std::ostringstream out;
    out << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
        << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day());
    return out.str();
}

double parse_number(const std::string& token, const std::string& what, std::size_t line) {
    double v = 0.0;
    const auto* b = token.data();
    auto res = std::from_chars(b, b + token.size(), v);
    if (res.ec != std::errc() || res.ptr != b + token.size() || !std::isfinite(v))
        throw ValidationError("weather line " + std::to_string(line) + ": cannot parse " + what + " '" + token + "'");
    return v;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return s.substr(i);
}

}  // namespace

std::string next_date(const std::string& date) { return format_date(parse_date(date) + std::chrono::days{1}); }

long days_between(const std::string& a, const std::string& b) {
    return static_cast<long>((parse_date(b) - parse_date(a)).count());
}

WeatherTable load_weather_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open weather file " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kWeatherHeader)
        throw ValidationError("weather line 1: expected header '" + std::string(kWeatherHeader) + "'");
    WeatherTable table;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(trim(tok));
        if (cols.size() != 4)
            throw ValidationError("weather line " + std::to_string(lineno) + ": expected 4 columns");
        WeatherDay day;
        day.date = cols[0];
        try {
            parse_date(day.date);
        } catch (const ValidationError& e) {
            throw ValidationError("weather line " + std::to_string(lineno) + ": " + e.what());
        }
        day.et0_mm = parse_number(cols[1], "et0_mm_day", lineno);
        day.rain_mm = parse_number(cols[2], "rain_mm", lineno);
        day.tavg_c = parse_number(cols[3], "tavg_c", lineno);
        if (day.et0_mm < 0.0) throw ValidationError("weather line " + std::to_string(lineno) + ": negative ET0");
        if (day.rain_mm < 0.0) throw ValidationError("weather line " + std::to_string(lineno) + ": negative rain");
        if (!table.empty() && days_between(table.back().date, day.date) != 1)
            throw ValidationError("weather line " + std::to_string(lineno) + ": date " + day.date +
                                  " does not follow " + table.back().date);
        table.push_back(std::move(day));
    }
    return table;
}

void write_weather_csv(const std::string& path, const WeatherTable& table) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write weather file " + path);
    out << kWeatherHeader << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& d : table) out << d.date << ',' << d.et0_mm << ',' << d.rain_mm << ',' << d.tavg_c << '\n';
}

WeatherTable synthetic_weather(const std::string& start_date, int days, std::uint64_t seed) {
    if (days < 0) throw DomainError("synthetic_weather: negative length");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> shower(1.0 / 6.0);  // mean 6 mm
    const auto start = parse_date(start_date);
    WeatherTable table;
    for (int k = 0; k < days; ++k) {
        const auto day = start + std::chrono::days{k};
        const std::chrono::year_month_day ymd{day};
        const auto jan1 = std::chrono::sys_days{ymd.year() / std::chrono::January / 1};
        const double doy = static_cast<double>((day - jan1).count()) + 1.0;
        // Peak around day 196 (mid July).
        const double season = std::cos(2.0 * std::numbers::pi * (doy - 196.0) / 365.0);
        WeatherDay w;
        w.date = format_date(day);
        w.tavg_c = 11.0 + 9.5 * season + 2.5 * noise(rng);
        w.et0_mm = std::clamp(1.2 + 4.8 * season + 0.8 * noise(rng), 0.1, 8.99);
        const double p_rain = 0.12 + 0.06 * std::cos(2.0 * std::numbers::pi * (doy - 160.0) / 365.0);
        w.rain_mm = unit(rng) < p_rain ? std::round(shower(rng) * 10.0) / 10.0 : 0.0;
        if (w.rain_mm > 0.0) w.et0_mm = std::max(0.1, 0.6 * w.et0_mm);
        w.et0_mm = std::round(w.et0_mm * 100.0) / 100.0;
        w.tavg_c = std::round(w.tavg_c * 100.0) / 100.0;
        table.push_back(w);
    }
    return table;
}

WeatherTable perturb_forecast(std::span<const WeatherDay> truth, const ForecastNoise& noise, std::uint64_t seed) {
    if (noise.et0_sd_per_lead < 0.0 || noise.rain_sd_per_lead < 0.0)
        throw DomainError("perturb_forecast: negative noise");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    WeatherTable out(truth.begin(), truth.end());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double lead = static_cast<double>(k + 1);
        const double e = g(rng);
        const double r = g(rng);
        out[k].et0_mm = std::max(0.0, out[k].et0_mm + lead * noise.et0_sd_per_lead * e);
        out[k].rain_mm = std::max(0.0, out[k].rain_mm + lead * noise.rain_sd_per_lead * r);
    }
    return out;
}

}  // namespace irrig
