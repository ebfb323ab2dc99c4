#pragma once

// Problem presets for -eps Lap u + u = f(x, u) with u = 0 on the boundary.

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "ndg/assembly.hpp"
#include "ndg/space.hpp"

namespace ndg {

struct ExactSolution {
  PointFunction value;
  GradientFunction gradient;
};

struct ProblemSpec {
  std::string name;
  Bounds bounds{0.0, 1.0, 0.0, 1.0};
  double eps = 1.0;
  double amplitude = 0.0;
  Nonlinearity f;
  Nonlinearity df;
  PointFunction u0;
  std::optional<ExactSolution> exact;
};

/// Critical parameter of the Bratu problem: lambda_c = 1/eps_c = 6.808124423.
inline constexpr double kBratuCriticalEps = 0.146883332;

/// Throws if df is not the u-derivative of f at 10 pseudo-random points.
inline void check_consistency(const ProblemSpec& p, double tol = 1e-5) {
  if (!p.f || !p.df || !p.u0) throw std::invalid_argument("problem " + p.name + ": f, f' and u0 are required");
  std::mt19937 rng(20240521u);
  std::uniform_real_distribution<double> ux(p.bounds.x0, p.bounds.x1), uy(p.bounds.y0, p.bounds.y1), uu(-1.5, 1.5);
  for (int k = 0; k < 10; ++k) {
    const Point x{ux(rng), uy(rng)};
    const double u = uu(rng);
    const double h = 1e-6;
    const double fd = (p.f(x, u + h) - p.f(x, u - h)) / (2.0 * h);
    const double d = p.df(x, u);
    if (std::abs(fd - d) > tol * std::max(1.0, std::abs(d))) {
      throw std::invalid_argument("problem " + p.name + ": f' disagrees with a finite difference of f at u=" +
                                  std::to_string(u) + " (" + std::to_string(d) + " vs " + std::to_string(fd) + ")");
    }
  }
}

inline double sine_bump(Point x, const Bounds& b) {
  const double s = (x.x - b.x0) / (b.x1 - b.x0), t = (x.y - b.y0) / (b.y1 - b.y0);
  return std::sin(std::numbers::pi * s) * std::sin(std::numbers::pi * t);
}

/// Named presets. amplitude scales the initial guess a sin(pi x) sin(pi y)
/// for the Bratu variants; NaN selects the preset default.
inline ProblemSpec preset(const std::string& name, double eps, double amplitude = std::nan("")) {
  ProblemSpec p;
  p.name = name;
  p.eps = eps;
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("preset: eps must lie in (0, 1]");
  if (name == "bratu" || name == "bratu_critical") {
    p.bounds = {0.0, 1.0, 0.0, 1.0};
    p.amplitude = std::isnan(amplitude) ? (name == "bratu" ? 1.0 : 2.0) : amplitude;
    p.f = [](Point, double u) { return std::exp(u) + u; };
    p.df = [](Point, double u) { return std::exp(u) + 1.0; };
    const double a = p.amplitude;
    const Bounds b = p.bounds;
    p.u0 = [a, b](Point x) { return a * sine_bump(x, b); };
  } else if (name == "ginzburg_landau") {
    p.bounds = {-1.0, 1.0, -1.0, 1.0};
    p.amplitude = std::isnan(amplitude) ? 1.0 : amplitude;
    p.f = [](Point, double u) { return 2.0 * u - u * u * u; };
    p.df = [](Point, double u) { return 2.0 - 3.0 * u * u; };
    const double a = p.amplitude;
    p.u0 = [a](Point x) { return x.x > 0.0 ? -a : (x.x < 0.0 ? a : 0.0); };
  } else if (name == "manufactured_linear") {
    p.bounds = {0.0, 1.0, 0.0, 1.0};
    p.amplitude = std::isnan(amplitude) ? 0.0 : amplitude;
    constexpr double pi = std::numbers::pi;
    const double c = 2.0 * eps * pi * pi + 1.0;
    p.f = [c](Point x, double) { return c * std::sin(pi * x.x) * std::sin(pi * x.y); };
    p.df = [](Point, double) { return 0.0; };
    const double a = p.amplitude;
    const Bounds b = p.bounds;
    p.u0 = [a, b](Point x) { return a * sine_bump(x, b); };
    p.exact = ExactSolution{[](Point x) { return std::sin(pi * x.x) * std::sin(pi * x.y); },
                            [](Point x) -> std::array<double, 2> {
                              return {pi * std::cos(pi * x.x) * std::sin(pi * x.y),
                                      pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
                            }};
  } else {
    throw std::invalid_argument("preset: unknown problem '" + name + "'");
  }
  check_consistency(p);
  return p;
}

}  // namespace ndg
