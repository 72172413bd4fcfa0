// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/reconstruction.h"

#include <cctype>
#include <cmath>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

void require_same(const Plane& a, const ComplexSpectrogram& x, const char* what) {
  if (a.rows() != x.real.rows() || a.cols() != x.real.cols())
    throw ShapeError(std::string(what) + ": mask is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ", spectrum is " +
                     std::to_string(x.real.rows()) + "x" + std::to_string(x.real.cols()));
}

void check_triple(const MaskTriple& m, const ComplexSpectrogram& x, const char* what) {
  require_same(m.mag_mask, x, what);
  require_same(m.cirm_real, x, what);
  require_same(m.cirm_imag, x, what);
}

void check_pair(const CartesianMask& m, const ComplexSpectrogram& x, const char* what) {
  require_same(m.real, x, what);
  require_same(m.imag, x, what);
}

ComplexSpectrogram like(const ComplexSpectrogram& x) {
  ComplexSpectrogram out;
  out.config = x.config;
  out.real.resize(x.real.rows(), x.real.cols());
  out.imag.resize(x.real.rows(), x.real.cols());
  return out;
}

}  // namespace

std::string_view mode_name(ReconstructionMode mode) {
  switch (mode) {
    case ReconstructionMode::kPolar: return "polar";
    case ReconstructionMode::kR: return "r";
    case ReconstructionMode::kC: return "c";
    case ReconstructionMode::kE: return "e";
  }
  return "?";
}

ReconstructionMode parse_mode(std::string_view text) {
  std::string s;
  for (char c : text) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "polar") return ReconstructionMode::kPolar;
  if (s == "r") return ReconstructionMode::kR;
  if (s == "c") return ReconstructionMode::kC;
  if (s == "e") return ReconstructionMode::kE;
  throw InvalidInput("unknown reconstruction mode '" + std::string(text) +
                     "' (expected polar, r, c or e)");
}

std::pair<double, double> triangle_correct(double pr, double pi) {
  const double norm = std::hypot(pr, pi);
  if (!(norm > kTriangleEpsilon)) return {1.0, 0.0};
  return {pr / norm, pi / norm};
}

std::pair<Plane, Plane> triangle_correct(const Plane& pr, const Plane& pi) {
  if (pr.rows() != pi.rows() || pr.cols() != pi.cols())
    throw ShapeError("triangle_correct: planes differ in shape");
  Plane cr(pr.rows(), pr.cols()), ci(pr.rows(), pr.cols());
  for (Eigen::Index k = 0; k < pr.size(); ++k) {
    const auto [a, b] = triangle_correct(pr.data()[k], pi.data()[k]);
    cr.data()[k] = a;
    ci.data()[k] = b;
  }
  return {std::move(cr), std::move(ci)};
}

MaskTriple identity_mask(std::size_t frames, std::size_t bins) {
  const auto r = static_cast<Eigen::Index>(frames), c = static_cast<Eigen::Index>(bins);
  return MaskTriple{Plane::Ones(r, c), Plane::Ones(r, c), Plane::Zero(r, c)};
}

PhasePlanes enhanced_phase(const MaskTriple& mask, const ComplexSpectrogram& x) {
  check_triple(mask, x, "enhanced_phase");
  const auto mp = magnitude_phase(x);
  const auto [tcr, tci] = triangle_correct(mask.cirm_real, mask.cirm_imag);
  PhasePlanes out;
  out.cos_phase = tcr * mp.cos_phase - tci * mp.sin_phase;
  out.sin_phase = tcr * mp.sin_phase + tci * mp.cos_phase;
  return out;
}

ComplexSpectrogram reconstruct_polar(const MaskTriple& mask, const ComplexSpectrogram& x) {
  check_triple(mask, x, "reconstruct_polar");
  ComplexSpectrogram out = like(x);
  const Eigen::Index n = x.real.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto [ur, ui] = triangle_correct(mask.cirm_real.data()[k], mask.cirm_imag.data()[k]);
    const double xr = x.real.data()[k], xi = x.imag.data()[k];
    const double m = mask.mag_mask.data()[k];
    out.real.data()[k] = m * (ur * xr - ui * xi);
    out.imag.data()[k] = m * (ur * xi + ui * xr);
  }
  return out;
}

ComplexSpectrogram reconstruct_cartesian(ReconstructionMode mode, const CartesianMask& mask,
                                         const ComplexSpectrogram& x) {
  check_pair(mask, x, "reconstruct_cartesian");
  ComplexSpectrogram out = like(x);
  const Eigen::Index n = x.real.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mr = mask.real.data()[k], mi = mask.imag.data()[k];
    const double xr = x.real.data()[k], xi = x.imag.data()[k];
    double sr = 0, si = 0;
    switch (mode) {
      case ReconstructionMode::kR:
        sr = mr * xr;
        si = mi * xi;
        break;
      case ReconstructionMode::kC:
        sr = mr * xr - mi * xi;
        si = mr * xi + mi * xr;
        break;
      case ReconstructionMode::kE: {
        const double mag = std::hypot(xr, xi) * std::hypot(mr, mi);
        const double theta = std::atan2(xi, xr) + std::atan2(mi, mr);
        sr = mag * std::cos(theta);
        si = mag * std::sin(theta);
        break;
      }
      case ReconstructionMode::kPolar:
        throw UsageError("reconstruct_cartesian: polar mode needs a MaskTriple");
    }
    out.real.data()[k] = sr;
    out.imag.data()[k] = si;
  }
  return out;
}

MaskTriple reconstruct_polar_backward(const MaskTriple& mask, const ComplexSpectrogram& x,
                                      const Plane& d_real, const Plane& d_imag) {
  check_triple(mask, x, "reconstruct_polar_backward");
  require_same(d_real, x, "reconstruct_polar_backward");
  require_same(d_imag, x, "reconstruct_polar_backward");
  const Eigen::Index rows = x.real.rows(), cols = x.real.cols();
  MaskTriple g{Plane(rows, cols), Plane(rows, cols), Plane(rows, cols)};
  for (Eigen::Index k = 0; k < x.real.size(); ++k) {
    const double pr = mask.cirm_real.data()[k], pi = mask.cirm_imag.data()[k];
    const double norm = std::hypot(pr, pi);
    const double xr = x.real.data()[k], xi = x.imag.data()[k];
    const double m = mask.mag_mask.data()[k];
    const double gr = d_real.data()[k], gi = d_imag.data()[k];
    double ur = 1.0, ui = 0.0;
    const bool live = norm > kTriangleEpsilon;
    if (live) {
      ur = pr / norm;
      ui = pi / norm;
    }
    g.mag_mask.data()[k] = gr * (ur * xr - ui * xi) + gi * (ur * xi + ui * xr);
    double dpr = 0, dpi = 0;
    if (live) {
      const double dur = m * (gr * xr + gi * xi);
      const double dui = m * (-gr * xi + gi * xr);
      const double radial = ur * dur + ui * dui;
      dpr = (dur - ur * radial) / norm;
      dpi = (dui - ui * radial) / norm;
    }
    g.cirm_real.data()[k] = dpr;
    g.cirm_imag.data()[k] = dpi;
  }
  return g;
}

CartesianMask reconstruct_cartesian_backward(ReconstructionMode mode, const CartesianMask& mask,
                                             const ComplexSpectrogram& x, const Plane& d_real,
                                             const Plane& d_imag) {
  check_pair(mask, x, "reconstruct_cartesian_backward");
  require_same(d_real, x, "reconstruct_cartesian_backward");
  require_same(d_imag, x, "reconstruct_cartesian_backward");
  CartesianMask g;
  switch (mode) {
    case ReconstructionMode::kR:
      g.real = d_real * x.real;
      g.imag = d_imag * x.imag;
      break;
    // E is the same function as C written in polar form.
    case ReconstructionMode::kC:
    case ReconstructionMode::kE:
      g.real = d_real * x.real + d_imag * x.imag;
      g.imag = -d_real * x.imag + d_imag * x.real;
      break;
    case ReconstructionMode::kPolar:
      throw UsageError("reconstruct_cartesian_backward: polar mode needs a MaskTriple");
  }
  return g;
}

}  // namespace mpcrn
