#pragma once

#include <functional>
#include <string_view>
#include <vector>

namespace qssep {

inline constexpr int kMinGridPoints = 50;

/// Function on [0,1] sampled at the cell midpoints x_m = (m + 1/2)/M, m = 0..M-1.
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(std::vector<double> values);

    static GridFunction from(const std::function<double(double)>& f, int M);
    static GridFunction constant(double c, int M);

    int size() const { return static_cast<int>(v_.size()); }
    double x(int m) const { return (m + 0.5) / size(); }
    double operator[](int m) const { return v_[m]; }
    double& operator[](int m) { return v_[m]; }
    const std::vector<double>& values() const { return v_; }

    /// Piecewise-linear interpolation through the midpoints, constant beyond them.
    double operator()(double x) const;
    double integral() const;
    double max_abs() const;

private:
    std::vector<double> v_;
};

/// Profiles accepted on the command line:
///   const:c            h(x) = c
///   linear:a,b         h(x) = a + b x
///   poly:c0,c1,...     h(x) = sum c_k x^k
///   step:x0,lo,hi      lo for x < x0, hi otherwise
///   sin:amp,k          amp sin(k pi x)
std::function<double(double)> parse_profile(std::string_view spec);
GridFunction parse_grid_function(std::string_view spec, int M);

} // namespace qssep
