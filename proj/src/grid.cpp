#include "qssep/grid.hpp"

#include "qssep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace qssep {

GridFunction::GridFunction(std::vector<double> values) : v_(std::move(values)) {
    if (static_cast<int>(v_.size()) < kMinGridPoints)
        throw InvalidArgument("grid functions need at least " + std::to_string(kMinGridPoints) + " points");
    for (double v : v_) require(std::isfinite(v), "grid function values must be finite");
}

GridFunction GridFunction::from(const std::function<double(double)>& f, int M) {
    std::vector<double> v(std::max(M, 0));
    for (int m = 0; m < M; ++m) v[m] = f((m + 0.5) / M);
    return GridFunction(std::move(v));
}

GridFunction GridFunction::constant(double c, int M) { return from([c](double) { return c; }, M); }

double GridFunction::operator()(double x) const {
    const int M = size();
    const double s = x * M - 0.5;
    if (s <= 0) return v_.front();
    if (s >= M - 1) return v_.back();
    const int k = static_cast<int>(s);
    const double t = s - k;
    return (1 - t) * v_[k] + t * v_[k + 1];
}

double GridFunction::integral() const {
    double s = 0.0;
    for (double v : v_) s += v;
    return s / size();
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : v_) m = std::max(m, std::abs(v));
    return m;
}

namespace {

std::vector<double> parse_numbers(std::string_view s) {
    std::vector<double> out;
    std::string cur;
    auto flush = [&]() {
        if (cur.empty()) throw InvalidArgument("empty number in profile");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cur, &used);
        } catch (const std::exception&) {
            throw InvalidArgument("bad number '" + cur + "' in profile");
        }
        if (used != cur.size()) throw InvalidArgument("bad number '" + cur + "' in profile");
        out.push_back(v);
        cur.clear();
    };
    for (char c : s) {
        if (c == ',') flush();
        else cur.push_back(c);
    }
    flush();
    return out;
}

} // namespace

std::function<double(double)> parse_profile(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) throw InvalidArgument("profile must look like kind:args, got '" + std::string(spec) + "'");
    const std::string kind(spec.substr(0, colon));
    const std::vector<double> a = parse_numbers(spec.substr(colon + 1));
    auto need = [&](std::size_t n) {
        if (a.size() != n)
            throw InvalidArgument("profile '" + kind + "' takes " + std::to_string(n) + " arguments");
    };
    if (kind == "const") {
        need(1);
        const double c = a[0];
        return [c](double) { return c; };
    }
    if (kind == "linear") {
        need(2);
        return [a](double x) { return a[0] + a[1] * x; };
    }
    if (kind == "poly") {
        return [a](double x) {
            double s = 0.0;
            for (auto it = a.rbegin(); it != a.rend(); ++it) s = s * x + *it;
            return s;
        };
    }
    if (kind == "step") {
        need(3);
        return [a](double x) { return x < a[0] ? a[1] : a[2]; };
    }
    if (kind == "sin") {
        need(2);
        return [a](double x) { return a[0] * std::sin(a[1] * std::numbers::pi * x); };
    }
    throw InvalidArgument("unknown profile kind '" + kind + "'");
}

GridFunction parse_grid_function(std::string_view spec, int M) { return GridFunction::from(parse_profile(spec), M); }

} // namespace qssep
