#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tontine/error.hpp"

namespace tontine {

/// One-year death probabilities q_a for contiguous integer ages, closed by a
/// terminal age whose q equals 1.
///
/// Survival between integer ages follows the uniform distribution of deaths
/// (UDD): a fraction f of the year at age a survives with probability
/// 1 - f q_a. The support therefore ends at terminal_age() + 1. Instances are
/// immutable and safe to share between threads.
class LifeTable {
public:
    LifeTable(int first_age, std::vector<double> qx) : first_age_(first_age), qx_(std::move(qx)) {
        require(!qx_.empty(), "life table has no rows");
        for (std::size_t j = 0; j < qx_.size(); ++j) {
            const double q = qx_[j];
            require(q >= 0.0 && q <= 1.0, "q at age " + std::to_string(first_age_ + static_cast<int>(j)) +
                                              " outside [0, 1]");
        }
        require(qx_.back() == 1.0, "q at the terminal age must equal 1");
        survivors_.resize(qx_.size() + 1);
        survivors_[0] = 1.0;
        for (std::size_t j = 0; j < qx_.size(); ++j) survivors_[j + 1] = survivors_[j] * (1.0 - qx_[j]);
    }

    int first_age() const noexcept { return first_age_; }
    int terminal_age() const noexcept { return first_age_ + static_cast<int>(qx_.size()) - 1; }
    /// Age at which survival reaches zero.
    int support_end() const noexcept { return terminal_age() + 1; }
    std::span<const double> qx() const noexcept { return qx_; }

    double q(int age) const {
        require(age >= first_age_ && age <= terminal_age(), "age " + std::to_string(age) + " outside table");
        return qx_[static_cast<std::size_t>(age - first_age_)];
    }

    /// Probability that a life aged first_age() reaches exact age `age`.
    double survival_from_start(double age) const {
        require(age >= first_age_, "age below table range");
        const double offset = age - first_age_;
        if (offset >= static_cast<double>(qx_.size())) return 0.0;
        const auto whole = static_cast<std::size_t>(offset);
        const double frac = offset - static_cast<double>(whole);
        return survivors_[whole] * (1.0 - frac * qx_[whole]);
    }

    /// As survival_from_start, for the age x_periods / periods_per_year with
    /// integer arithmetic on the whole-year part.
    double survival_from_start_periods(long long age_periods, int periods_per_year) const {
        const long long whole = age_periods / periods_per_year;
        const long long rem = age_periods % periods_per_year;
        require(whole >= first_age_, "age below table range");
        const long long offset = whole - first_age_;
        if (offset >= static_cast<long long>(qx_.size())) return 0.0;
        const auto j = static_cast<std::size_t>(offset);
        const double frac = static_cast<double>(rem) / periods_per_year;
        return survivors_[j] * (1.0 - frac * qx_[j]);
    }

    /// Cumulative survival at integer ages first_age() .. support_end().
    std::span<const double> survivors() const noexcept { return survivors_; }

private:
    int first_age_;
    std::vector<double> qx_;
    std::vector<double> survivors_;
};

/// How the loader adjusted the terminal row.
struct LoadReport {
    std::size_t rows = 0;
    bool terminal_coerced = false;   // last q within 1e-12 of 1, set to exactly 1
    bool terminal_appended = false;  // synthetic row with q = 1 added after the last age
};

struct LoadedTable {
    LifeTable table;
    LoadReport report;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads a table from CSV with header `age,qx`, one row per integer age.
/// Accepts LF or CRLF and a leading UTF-8 byte-order mark.
inline LoadedTable load_life_table(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    int first_age = 0;
    int previous_age = 0;
    std::vector<double> qx;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        view = detail::trim(view);
        if (view.empty()) continue;
        if (!have_header) {
            const auto comma = view.find(',');
            require(comma != std::string_view::npos && detail::trim(view.substr(0, comma)) == "age" &&
                        detail::trim(view.substr(comma + 1)) == "qx",
                    "line " + std::to_string(line_no) + ": expected header 'age,qx'");
            have_header = true;
            continue;
        }
        const auto comma = view.find(',');
        int age = 0;
        double q = 0.0;
        if (comma == std::string_view::npos || !detail::parse_number(view.substr(0, comma), age) ||
            !detail::parse_number(view.substr(comma + 1), q) || !std::isfinite(q)) {
            throw ValidationError("line " + std::to_string(line_no) + ": malformed row '" + std::string(view) + "'");
        }
        require(q >= 0.0 && q <= 1.0, "line " + std::to_string(line_no) + ": q out of range [0, 1]");
        if (qx.empty()) {
            first_age = age;
        } else {
            require(age != previous_age, "line " + std::to_string(line_no) + ": duplicate age " + std::to_string(age));
            require(age == previous_age + 1,
                    "line " + std::to_string(line_no) + ": non-contiguous ages " + std::to_string(previous_age) +
                        " -> " + std::to_string(age));
        }
        previous_age = age;
        qx.push_back(q);
    }
    require(have_header, "empty life table file");
    require(!qx.empty(), "life table file has no data rows");

    LoadReport report;
    report.rows = qx.size();
    if (qx.back() >= 1.0 - 1e-12) {
        report.terminal_coerced = qx.back() != 1.0;
        qx.back() = 1.0;
    } else {
        qx.push_back(1.0);
        report.terminal_appended = true;
    }
    return {LifeTable(first_age, std::move(qx)), report};
}

inline void write_life_table(std::ostream& out, const LifeTable& table) {
    out << "age,qx\n";
    char buf[64];
    for (std::size_t j = 0; j < table.qx().size(); ++j) {
        const auto res = std::to_chars(buf, buf + sizeof buf, table.qx()[j]);
        out << table.first_age() + static_cast<int>(j) << ',' << std::string_view(buf, res.ptr - buf) << '\n';
    }
}

/// Gompertz-law table: force of mortality b * c^age integrated over each
/// year, q = 1 - exp(-b c^age (c - 1) / ln c), closed at max_age with q = 1.
inline LifeTable gompertz_table(double b, double c, int min_age, int max_age) {
    require(b > 0.0, "gompertz b must be positive");
    require(c > 1.0, "gompertz c must exceed 1");
    require(min_age >= 0 && max_age > min_age, "need 0 <= min_age < max_age");
    std::vector<double> qx;
    qx.reserve(static_cast<std::size_t>(max_age - min_age + 1));
    for (int age = min_age; age < max_age; ++age) {
        const double hazard = b * std::pow(c, age) * (c - 1.0) / std::log(c);
        qx.push_back(std::clamp(-std::expm1(-hazard), 0.0, 1.0));
    }
    qx.push_back(1.0);
    return LifeTable(min_age, std::move(qx));
}

/// Probability that a life aged x (years) survives t periods, with durations
/// converted to years as t / periods_per_year.
inline double survival_probability(const LifeTable& table, double x, double t, int periods_per_year = 1) {
    require(periods_per_year >= 1, "periods_per_year must be positive");
    require(t >= 0.0, "duration must be non-negative");
    const double start = table.survival_from_start(x);
    if (t == 0.0) return 1.0;
    if (start == 0.0) return 0.0;
    return table.survival_from_start(x + t / periods_per_year) / start;
}

/// Annuity-due factor at attained age x_periods / periods_per_year with
/// per-period effective rate `rate`:
///   1 + sum_{j >= 1} (1 + rate)^-j  jp
/// summed until survival reaches zero at the end of the table.
inline double annuity_factor(const LifeTable& table, long long x_periods, double rate, int periods_per_year = 1) {
    require(rate > -1.0, "rate must exceed -1");
    require(periods_per_year >= 1, "periods_per_year must be positive");
    const double start = table.survival_from_start_periods(x_periods, periods_per_year);
    if (start == 0.0) return 1.0;
    const double v = 1.0 / (1.0 + rate);
    double discount = 1.0;
    double total = 1.0;
    for (long long j = 1;; ++j) {
        const double s = table.survival_from_start_periods(x_periods + j, periods_per_year);
        if (s == 0.0) break;
        discount *= v;
        total += discount * s / start;
    }
    return total;
}

/// Duration t in years with F(t) = 1 - tp_x = p, solved linearly within the
/// year of age that contains it (UDD). Returns the smallest such t.
inline double inverse_cdf(const LifeTable& table, double x, double p) {
    require(p >= 0.0 && p < 1.0, "probability must lie in [0, 1)");
    const double start = table.survival_from_start(x);
    require(start > 0.0, "age beyond the end of the table");
    if (p == 0.0) return 0.0;
    const double target = (1.0 - p) * start;
    const auto s = table.survivors();
    // first index j with s[j + 1] <= target; s[j] > target holds for the
    // year containing x because survival at x exceeds the target
    const auto base = static_cast<std::size_t>(x - table.first_age());
    const auto it = std::upper_bound(s.begin() + static_cast<std::ptrdiff_t>(base) + 1, s.end(), target,
                                     [](double value, double element) { return value >= element; });
    const auto j = static_cast<std::size_t>(it - s.begin()) - 1;
    const double q = table.qx()[j];
    const double frac = (1.0 - target / s[j]) / q;
    const double age = table.first_age() + static_cast<double>(j) + std::clamp(frac, 0.0, 1.0);
    return std::max(age - x, 0.0);
}

}  // namespace tontine
