#include "spdelab/drift.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spdelab {

namespace {

double holder_map(double u, double eta) {
  const double a = std::min(std::abs(u), 1.0);
  return std::copysign(std::pow(a, eta), u);
}

bool is_pointwise(const std::string& kind) {
  return kind == "sincos" || kind == "sinsin" || kind == "sin_x" || kind == "sin_y" ||
         kind == "holder";
}

}  // namespace

Drift::Drift(DriftSpec spec, std::shared_ptr<const SineTransform> transform)
    : spec_(std::move(spec)), transform_(std::move(transform)) {
  if (is_pointwise(spec_.kind) && !transform_)
    throw std::invalid_argument("drift '" + spec_.kind + "' needs a collocation transform");
}

void Drift::eval(const SpectralVec& x, const SpectralVec& y, SpectralVec& out,
                 Scratch& s) const {
  const std::string& kind = spec_.kind;
  if (kind == "zero") {
    out.c.assign(x.c.size(), 0.0);
    return;
  }
  if (kind == "const") {
    out.c = spec_.const_coeffs;
    return;
  }
  // pointwise kinds
  const int np = transform_->n_points();
  const bool two_arg = kind == "sincos" || kind == "sinsin";
  const bool need_x = two_arg || kind == "sin_x" || (kind == "holder" && !spec_.x_independent);
  const bool need_y = two_arg || kind == "sin_y" || (kind == "holder" && !spec_.y_independent);
  if (need_x) transform_->to_physical(x, s.gx);
  if (need_y) transform_->to_physical(y, s.gy);
  s.gout.values.assign(static_cast<std::size_t>(np), 0.0);
  double* o = s.gout.values.data();
  const double* px = need_x ? s.gx.values.data() : nullptr;
  const double* py = need_y ? s.gy.values.data() : nullptr;
  if (kind == "sincos") {
    for (int j = 0; j < np; ++j) o[j] = spec_.ax * std::sin(px[j]) + spec_.ay * std::cos(py[j]);
  } else if (kind == "sinsin") {
    for (int j = 0; j < np; ++j) o[j] = spec_.ax * std::sin(px[j]) + spec_.ay * std::sin(py[j]);
  } else if (kind == "sin_x") {
    for (int j = 0; j < np; ++j) o[j] = spec_.ax * std::sin(px[j]);
  } else if (kind == "sin_y") {
    for (int j = 0; j < np; ++j) o[j] = spec_.ay * std::sin(py[j]);
  } else if (kind == "holder") {
    for (int j = 0; j < np; ++j) {
      double v = 0.0;
      if (need_x) v += spec_.ax * holder_map(px[j], spec_.eta_x);
      if (need_y) v += spec_.ay * holder_map(py[j], spec_.eta_y);
      o[j] = v;
    }
  } else {
    throw std::invalid_argument("unknown drift kind '" + kind + "'");
  }
  transform_->from_physical(s.gout, out);
}

SpectralVec Drift::eval(const SpectralVec& x, const SpectralVec& y) const {
  Scratch s;
  SpectralVec out;
  eval(x, y, out, s);
  return out;
}

SpectralVec Drift::eval(const SpectralVec& x) const {
  if (!spec_.y_independent && spec_.kind != "zero" && spec_.kind != "const")
    throw std::invalid_argument("drift '" + spec_.kind + "' is not y-independent");
  return eval(x, x);
}

Drift make_drift(DriftSpec spec, std::shared_ptr<const SineTransform> transform) {
  const std::string& kind = spec.kind;
  const double root_pi = std::sqrt(std::numbers::pi);
  const double inf = std::numeric_limits<double>::infinity();

  if (kind == "zero") {
    spec.bound = 0.0;
    spec.lipschitz_in_y = 0.0;
    spec.y_independent = true;
    spec.x_independent = true;
  } else if (kind == "const") {
    if (spec.const_coeffs.empty())
      throw std::invalid_argument("const drift needs coefficient values");
    double s = 0.0;
    for (double v : spec.const_coeffs) s += v * v;
    spec.bound = std::sqrt(s);
    spec.lipschitz_in_y = 0.0;
    spec.y_independent = true;
    spec.x_independent = true;
  } else if (kind == "sincos" || kind == "sinsin") {
    spec.bound = (std::abs(spec.ax) + std::abs(spec.ay)) * root_pi;
    spec.lipschitz_in_y = std::abs(spec.ay);
    spec.y_independent = spec.ay == 0.0;
    spec.x_independent = spec.ax == 0.0;
  } else if (kind == "sin_x") {
    spec.bound = std::abs(spec.ax) * root_pi;
    spec.lipschitz_in_y = 0.0;
    spec.y_independent = true;
  } else if (kind == "sin_y") {
    spec.bound = std::abs(spec.ay) * root_pi;
    spec.lipschitz_in_y = std::abs(spec.ay);
    spec.x_independent = true;
  } else if (kind == "holder") {
    if (!(spec.eta_x > 0.0 && spec.eta_x < 1.0) || !(spec.eta_y > 0.0 && spec.eta_y < 1.0))
      throw std::invalid_argument("holder drift needs exponents in (0,1)");
    spec.bound = (std::abs(spec.ax) + std::abs(spec.ay)) * root_pi;
    spec.lipschitz_in_y = spec.ay == 0.0 ? 0.0 : inf;  // not Lipschitz in y
    spec.y_independent = spec.ay == 0.0;
    spec.x_independent = spec.ax == 0.0;
    spec.eta1 = spec.eta_x;
    spec.eta2 = spec.eta_y;
    spec.eta3 = spec.eta_x;
  } else {
    throw std::invalid_argument("unknown drift kind '" + kind + "'");
  }
  if (spec.y_independent && spec.x_independent && kind != "zero" && kind != "const")
    throw std::invalid_argument("drift '" + kind + "' degenerates to a constant; use 'const'");
  return Drift(std::move(spec), std::move(transform));
}

void check_dissipativity(const ModeSpectrum& spectrum, const Drift& f) {
  const double lf = f.spec().lipschitz_in_y;
  if (!(spectrum.lambda[0] - lf > 0.0))
    throw std::invalid_argument("fast drift violates dissipativity: lambda_1 - L_F = " +
                                std::to_string(spectrum.lambda[0] - lf) + " must be > 0");
}

Observable::Observable(ObservableSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind != "const" && spec_.kind != "coord" && spec_.kind != "sin_mode")
    throw std::invalid_argument("unknown observable kind '" + spec_.kind + "'");
  if (spec_.mode < 0) throw std::invalid_argument("observable mode must be >= 0");
}

double Observable::eval(const SpectralVec& y) const {
  if (spec_.kind == "const") return spec_.a;
  if (spec_.mode >= y.size()) throw std::invalid_argument("observable mode out of range");
  if (spec_.kind == "coord") return y[spec_.mode];
  return spec_.a * std::sin(y[spec_.mode]);
}

}  // namespace spdelab
