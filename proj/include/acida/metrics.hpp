#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "acida/error.hpp"

namespace acida {

// Morph scores follow the "higher means morphed" convention: a score s is
// flagged as an attack at threshold tau iff s > tau.

template <typename Scalar = double>
struct ScoreSet {
  std::vector<Scalar> bona_fide;
  std::vector<Scalar> morph;

  void check() const {
    if (bona_fide.empty()) throw DataError("score set has no bona fide scores");
    if (morph.empty()) throw DataError("score set has no morph scores");
    for (const auto* side : {&bona_fide, &morph}) {
      for (Scalar s : *side) {
        if (!std::isfinite(s)) throw DataError("score set contains a non-finite score");
      }
    }
  }
};

// Share of bona fide scores strictly above tau.
template <typename Scalar>
double bpcer(std::span<const Scalar> bona_fide, double tau) {
  if (bona_fide.empty()) throw DataError("bpcer: no bona fide scores");
  const auto above = std::count_if(bona_fide.begin(), bona_fide.end(),
                                   [tau](Scalar s) { return static_cast<double>(s) > tau; });
  return static_cast<double>(above) / static_cast<double>(bona_fide.size());
}

// Share of morph scores not strictly above tau.
template <typename Scalar>
double apcer(std::span<const Scalar> morph, double tau) {
  if (morph.empty()) throw DataError("apcer: no morph scores");
  const auto above = std::count_if(morph.begin(), morph.end(),
                                   [tau](Scalar s) { return static_cast<double>(s) > tau; });
  return 1.0 - static_cast<double>(above) / static_cast<double>(morph.size());
}

struct ErrorPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  std::size_t morph_accepted = 0;
  std::size_t bona_fide_rejected = 0;
};

// Both error rates are step functions that only change at observed scores, so
// evaluating at every distinct score plus -inf/+inf covers every operating point.
// Returned in ascending threshold order.
template <typename Scalar>
std::vector<ErrorPoint> error_sweep(const ScoreSet<Scalar>& s) {
  s.check();
  std::vector<double> b(s.bona_fide.begin(), s.bona_fide.end());
  std::vector<double> m(s.morph.begin(), s.morph.end());
  std::sort(b.begin(), b.end());
  std::sort(m.begin(), m.end());

  std::vector<double> grid;
  grid.reserve(b.size() + m.size() + 2);
  grid.push_back(-std::numeric_limits<double>::infinity());
  grid.insert(grid.end(), b.begin(), b.end());
  grid.insert(grid.end(), m.begin(), m.end());
  grid.push_back(std::numeric_limits<double>::infinity());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const auto nb = static_cast<double>(b.size());
  const auto nm = static_cast<double>(m.size());
  std::vector<ErrorPoint> out;
  out.reserve(grid.size());
  for (double tau : grid) {
    const auto b_above = b.end() - std::upper_bound(b.begin(), b.end(), tau);
    const auto m_above = m.end() - std::upper_bound(m.begin(), m.end(), tau);
    const auto accepted = m.size() - static_cast<std::size_t>(m_above);
    const auto rejected = static_cast<std::size_t>(b_above);
    out.push_back({tau, static_cast<double>(accepted) / nm, static_cast<double>(rejected) / nb, accepted, rejected});
  }
  return out;
}

// Midpoint of APCER and BPCER at the threshold minimizing their gap; ties go
// to the lower threshold. Gaps are compared on counts scaled to a common
// denominator so rounding cannot break ties.
template <typename Scalar>
double eer(const ScoreSet<Scalar>& s) {
  const auto sweep = error_sweep(s);
  const std::size_t nb = s.bona_fide.size();
  const std::size_t nm = s.morph.size();
  const auto scaled_gap = [&](const ErrorPoint& p) {
    const std::size_t a = p.morph_accepted * nb;
    const std::size_t b = p.bona_fide_rejected * nm;
    return a > b ? a - b : b - a;
  };
  const ErrorPoint* best = &sweep.front();
  std::size_t best_gap = scaled_gap(*best);
  for (const ErrorPoint& p : sweep) {
    const std::size_t gap = scaled_gap(p);
    if (gap < best_gap) {
      best_gap = gap;
      best = &p;
    }
  }
  return 0.5 * (best->bpcer + best->apcer);
}

// Linear interpolation of the crossing between adjacent sweep points.
template <typename Scalar>
double eer_interpolated(const ScoreSet<Scalar>& s) {
  const auto sweep = error_sweep(s);
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double gap = sweep[i].bpcer - sweep[i].apcer;
    if (gap == 0.0) return sweep[i].bpcer;
    if (i + 1 < sweep.size()) {
      const double next = sweep[i + 1].bpcer - sweep[i + 1].apcer;
      if (gap > 0.0 && next < 0.0) {
        const double t = gap / (gap - next);
        const double b = sweep[i].bpcer + t * (sweep[i + 1].bpcer - sweep[i].bpcer);
        const double a = sweep[i].apcer + t * (sweep[i + 1].apcer - sweep[i].apcer);
        return 0.5 * (a + b);
      }
    }
  }
  return eer(s);
}

// Lowest BPCER over thresholds with APCER <= max_apcer; 1 when unattainable.
template <typename Scalar>
double bpcer_at_apcer(const ScoreSet<Scalar>& s, double max_apcer) {
  if (!(max_apcer > 0.0 && max_apcer < 1.0)) {
    throw ConfigError("bpcer_at_apcer: APCER bound must lie in (0, 1)");
  }
  double best = 1.0;
  for (const ErrorPoint& p : error_sweep(s)) {
    if (p.apcer <= max_apcer) best = std::min(best, p.bpcer);
  }
  return best;
}

inline constexpr std::array<double, 4> kWaeWeights = {0.3, 0.1, 0.2, 0.4};
inline constexpr std::array<double, 3> kApcerOperatingPoints = {0.1, 0.05, 0.01};

// Weighted average of [EER, B_0.1, B_0.05, B_0.01].
inline double wae(const std::array<double, 4>& errors) {
  double total = 0.0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] >= 0.0 && errors[i] <= 1.0)) throw DataError("wae: error value out of [0, 1]");
    total += kWaeWeights[i] * errors[i];
  }
  return total;
}

struct ErrorSummary {
  double eer = 0.0;
  double b_010 = 0.0;
  double b_005 = 0.0;
  double b_001 = 0.0;
  double wae = 0.0;

  std::array<double, 4> as_array() const { return {eer, b_010, b_005, b_001}; }
};

template <typename Scalar>
ErrorSummary summarize(const ScoreSet<Scalar>& s) {
  ErrorSummary out;
  out.eer = eer(s);
  out.b_010 = bpcer_at_apcer(s, kApcerOperatingPoints[0]);
  out.b_005 = bpcer_at_apcer(s, kApcerOperatingPoints[1]);
  out.b_001 = bpcer_at_apcer(s, kApcerOperatingPoints[2]);
  out.wae = wae(out.as_array());
  return out;
}

struct DetPoint {
  double apcer = 0.0;
  double bpcer = 0.0;

  friend bool operator==(const DetPoint&, const DetPoint&) = default;
};

using DetCurve = std::vector<DetPoint>;

// (APCER, BPCER) at every threshold, ordered by APCER with BPCER non-increasing,
// repeated points collapsed.
template <typename Scalar>
DetCurve det_curve(const ScoreSet<Scalar>& s) {
  DetCurve curve;
  for (const ErrorPoint& p : error_sweep(s)) {
    const DetPoint point{p.apcer, p.bpcer};
    if (curve.empty() || !(curve.back() == point)) curve.push_back(point);
  }
  return curve;
}

// CSV with a header containing "score" and "is_morph" (0/1 or true/false).
ScoreSet<double> read_score_csv(const std::filesystem::path& path);
std::string det_curve_csv(const DetCurve& curve);
// Self-contained SVG rendering of one or more labelled curves on log-scaled axes.
std::string det_curve_svg(const std::vector<std::pair<std::string, DetCurve>>& curves);

}  // namespace acida
