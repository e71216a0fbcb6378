#include "sbm/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <quadmath.h>

#include <boost/math/tools/roots.hpp>

#include "sbm/io.hpp"

namespace sbm {

namespace {

// Overload set spanning double, long double, complex<double> and binary128.
namespace mth {
using std::abs;
using std::exp;
using std::log;
using std::log1p;
using std::pow;
using std::sqrt;
inline quad abs(quad x) { return fabsq(x); }
inline quad exp(quad x) { return expq(x); }
inline quad log(quad x) { return logq(x); }
inline quad log1p(quad x) { return log1pq(x); }
inline quad pow(quad x, quad y) { return powq(x, y); }
inline quad sqrt(quad x) { return sqrtq(x); }
}  // namespace mth

template <class T>
double mag(const T& x) {
  return static_cast<double>(mth::abs(x));
}

// Below this magnitude the log-cosh / log-sinhc helpers switch to their
// Taylor series. The series are truncated at x^6, so binary128 needs a far
// smaller switch point than double to stay smooth across it.
template <class T>
constexpr double series_switch() {
  return std::is_same_v<T, quad> ? 1e-6 : 1e-2;
}

template <class T>
T log1p_any(T w) {
  if constexpr (!std::is_same_v<T, cplx>) {
    return mth::log1p(w);
  } else {
    if (std::abs(w) < 1e-2) {
      // alternating series through w^9; relative truncation error < 1e-18
      T p = w, s = 0;
      for (int k = 1; k <= 9; ++k) {
        s += (k % 2 ? p : -p) / static_cast<double>(k);
        p *= w;
      }
      return s;
    }
    return std::log(T(1) + w);
  }
}

template <class T>
T ln2() {
  return mth::log(T(2));
}

// log cosh sqrt(x)
template <class T>
T log_cosh_sqrt(T x) {
  if (mag(x) < series_switch<T>()) {
    return x * (T(1) / T(2) +
                x * (T(-1) / T(12) +
                     x * (T(1) / T(45) +
                          x * (T(-17) / T(2520) + x * (T(31) / T(14175) - x * T(691) / T(467775))))));
  }
  T s = mth::sqrt(x);
  return s - ln2<T>() + log1p_any(T(mth::exp(T(-2) * s)));
}

// log(sinh sqrt(x) / sqrt(x))
template <class T>
T log_sinhc_sqrt(T x) {
  if (mag(x) < series_switch<T>()) {
    return x * (T(1) / T(6) +
                x * (T(-1) / T(180) +
                     x * (T(1) / T(2835) + x * (T(-1) / T(37800) + x * T(1) / T(467775)))));
  }
  T s = mth::sqrt(x);
  return s - ln2<T>() + log1p_any(T(-mth::exp(T(-2) * s))) - mth::log(s);
}

// d/dx log cosh sqrt(x) = tanh(s)/(2s)
template <class T>
T d_log_cosh_sqrt(T x) {
  if (mag(x) < series_switch<T>()) {
    return (T(1) + x * (T(-1) / T(3) +
                        x * (T(2) / T(15) + x * (T(-17) / T(315) + x * T(62) / T(2835))))) /
           T(2);
  }
  T s = mth::sqrt(x);
  T e = mth::exp(T(-2) * s);
  return (T(1) - e) / (T(1) + e) / (T(2) * s);
}

// d/dx log(sinh s / s) = (coth s - 1/s)/(2s)
template <class T>
T d_log_sinhc_sqrt(T x) {
  if (mag(x) < series_switch<T>()) {
    return (T(1) / T(3) +
            x * (T(-1) / T(45) + x * (T(2) / T(945) + x * (T(-1) / T(4725) + x * T(2) / T(93555))))) /
           T(2);
  }
  T s = mth::sqrt(x);
  T e = mth::exp(T(-2) * s);
  return ((T(1) + e) / (T(1) - e) - T(1) / s) / (T(2) * s);
}

template <class T>
T family_value(Family f, double a, double b, T x) {
  switch (f) {
    case Family::pure_power:
      return mth::pow(x, T(a / 2));
    case Family::sum_of_powers:
      return mth::pow(x, T(a)) + mth::pow(x, T(b));
    case Family::power_of_shifted:
      return mth::pow(x + mth::pow(x, T(a)), T(b));
    case Family::power_log:
      return mth::pow(x, T(a)) * mth::pow(log1p_any(x), T(b));
    case Family::power_over_log:
      return mth::pow(x, T(a)) * mth::pow(log1p_any(x), T(-b));
    case Family::log_cosh:
      return mth::pow(log_cosh_sqrt(x), T(a));
    case Family::log_sinh:
      return mth::pow(log_sinhc_sqrt(x), T(a));
    case Family::custom:
      break;
  }
  return T(std::numeric_limits<double>::quiet_NaN());
}

template <class T>
T family_derivative(Family f, double a, double b, T x) {
  switch (f) {
    case Family::pure_power:
      return T(a / 2) * mth::pow(x, T(a / 2 - 1));
    case Family::sum_of_powers:
      return T(a) * mth::pow(x, T(a - 1)) + T(b) * mth::pow(x, T(b - 1));
    case Family::power_of_shifted:
      return T(b) * mth::pow(x + mth::pow(x, T(a)), T(b - 1)) * (T(1) + T(a) * mth::pow(x, T(a - 1)));
    case Family::power_log: {
      T L = log1p_any(x);
      return family_value(f, a, b, x) * (T(a) / x + T(b) / ((T(1) + x) * L));
    }
    case Family::power_over_log: {
      T L = log1p_any(x);
      return family_value(f, a, b, x) * (T(a) / x - T(b) / ((T(1) + x) * L));
    }
    case Family::log_cosh: {
      T h = log_cosh_sqrt(x);
      return T(a) * mth::pow(h, T(a - 1)) * d_log_cosh_sqrt(x);
    }
    case Family::log_sinh: {
      T h = log_sinhc_sqrt(x);
      return T(a) * mth::pow(h, T(a - 1)) * d_log_sinhc_sqrt(x);
    }
    case Family::custom:
      break;
  }
  return T(std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

namespace detail {

class PhiModel {
 public:
  virtual ~PhiModel() = default;
  virtual double value(double x) const = 0;
  virtual long double value(long double x) const { return value(static_cast<double>(x)); }
  virtual quad value(quad x) const { return value(static_cast<double>(x)); }
  virtual cplx value(cplx x) const = 0;
  virtual double deriv(double x) const {
    const double h = 1e-6 * x;
    return (value(x + h) - value(x - h)) / (2 * h);
  }
  virtual long double deriv(long double x) const { return deriv(static_cast<double>(x)); }
  virtual quad deriv(quad x) const { return deriv(static_cast<double>(x)); }
  virtual cplx deriv(cplx x) const {
    const double h = 1e-6 * std::abs(x);
    return (value(x + h) - value(x - h)) / (2 * h);
  }
  virtual bool has_complex() const { return true; }
  virtual bool has_quad() const { return true; }
  virtual bool closed_derivative() const { return true; }
  virtual std::optional<double> exact_power() const { return std::nullopt; }
};

namespace {

class FamilyModel final : public PhiModel {
 public:
  FamilyModel(Family f, double a, double b) : f_(f), a_(a), b_(b) {}
  double value(double x) const override { return family_value(f_, a_, b_, x); }
  long double value(long double x) const override { return family_value(f_, a_, b_, x); }
  quad value(quad x) const override { return family_value(f_, a_, b_, x); }
  cplx value(cplx x) const override { return family_value(f_, a_, b_, x); }
  double deriv(double x) const override { return family_derivative(f_, a_, b_, x); }
  long double deriv(long double x) const override { return family_derivative(f_, a_, b_, x); }
  quad deriv(quad x) const override { return family_derivative(f_, a_, b_, x); }
  cplx deriv(cplx x) const override { return family_derivative(f_, a_, b_, x); }
  std::optional<double> exact_power() const override {
    if (f_ == Family::pure_power) return a_ / 2;
    return std::nullopt;
  }

 private:
  Family f_;
  double a_, b_;
};

class CustomModel final : public PhiModel {
 public:
  explicit CustomModel(CustomEvaluator ev) : ev_(std::move(ev)) {}
  double value(double x) const override { return ev_.value(x); }
  cplx value(cplx x) const override {
    if (!ev_.complex_value) throw DomainError("custom evaluator '" + ev_.name + "' has no complex form");
    return ev_.complex_value(x);
  }
  double deriv(double x) const override {
    return ev_.derivative ? ev_.derivative(x) : PhiModel::deriv(x);
  }
  cplx deriv(cplx x) const override {
    return ev_.complex_derivative ? ev_.complex_derivative(x) : PhiModel::deriv(x);
  }
  bool has_complex() const override { return static_cast<bool>(ev_.complex_value); }
  bool has_quad() const override { return false; }
  bool closed_derivative() const override { return static_cast<bool>(ev_.derivative); }

 private:
  CustomEvaluator ev_;
};

// x / phi(x)
class ConjugateModel final : public PhiModel {
 public:
  explicit ConjugateModel(BernsteinSpec base) : base_(std::move(base)) {}
  double value(double x) const override { return x / base_(x); }
  long double value(long double x) const override { return x / base_(x); }
  quad value(quad x) const override { return x / base_(x); }
  cplx value(cplx x) const override { return x / base_(x); }
  double deriv(double x) const override {
    double p = base_(x);
    return (p - x * base_.derivative(x)) / (p * p);
  }
  long double deriv(long double x) const override {
    long double p = base_(x);
    return (p - x * base_.derivative(x)) / (p * p);
  }
  quad deriv(quad x) const override {
    quad p = base_(x);
    return (p - x * base_.derivative(x)) / (p * p);
  }
  cplx deriv(cplx x) const override {
    cplx p = base_(x);
    return (p - x * base_.derivative(x)) / (p * p);
  }
  bool has_complex() const override { return base_.has_complex(); }
  bool has_quad() const override { return base_.has_quad(); }
  bool closed_derivative() const override { return base_.has_closed_form_derivative(); }
  std::optional<double> exact_power() const override {
    if (auto p = base_.exact_power()) return 1 - *p;
    return std::nullopt;
  }

 private:
  BernsteinSpec base_;
};

// phi(x a^{-2})
class RescaleModel final : public PhiModel {
 public:
  RescaleModel(BernsteinSpec base, double a) : base_(std::move(base)), s_(1.0 / (a * a)) {}
  double value(double x) const override { return base_(x * s_); }
  long double value(long double x) const override { return base_(x * static_cast<long double>(s_)); }
  quad value(quad x) const override { return base_(x * static_cast<quad>(s_)); }
  cplx value(cplx x) const override { return base_(x * s_); }
  double deriv(double x) const override { return base_.derivative(x * s_) * s_; }
  quad deriv(quad x) const override {
    return base_.derivative(x * static_cast<quad>(s_)) * static_cast<quad>(s_);
  }
  long double deriv(long double x) const override {
    return base_.derivative(x * static_cast<long double>(s_)) * static_cast<long double>(s_);
  }
  cplx deriv(cplx x) const override { return base_.derivative(x * s_) * s_; }
  bool has_complex() const override { return base_.has_complex(); }
  bool has_quad() const override { return base_.has_quad(); }
  bool closed_derivative() const override { return base_.has_closed_form_derivative(); }
  std::optional<double> exact_power() const override { return base_.exact_power(); }

 private:
  BernsteinSpec base_;
  double s_;
};

}  // namespace
}  // namespace detail

// ---------------------------------------------------------------------------

std::string family_name(Family f) {
  switch (f) {
    case Family::sum_of_powers: return "sum_of_powers";
    case Family::power_of_shifted: return "power_of_shifted";
    case Family::power_log: return "power_log";
    case Family::power_over_log: return "power_over_log";
    case Family::log_cosh: return "log_cosh";
    case Family::log_sinh: return "log_sinh";
    case Family::pure_power: return "pure_power";
    case Family::custom: return "custom";
  }
  return "?";
}

std::vector<std::string> family_names() {
  return {"sum_of_powers", "power_of_shifted", "power_log", "power_over_log",
          "log_cosh",      "log_sinh",         "pure_power", "custom"};
}

std::optional<Family> family_from_name(std::string_view name) {
  for (Family f : {Family::sum_of_powers, Family::power_of_shifted, Family::power_log,
                   Family::power_over_log, Family::log_cosh, Family::log_sinh, Family::pure_power,
                   Family::custom})
    if (family_name(f) == name) return f;
  return std::nullopt;
}

std::optional<CustomEvaluator> builtin_custom(std::string_view name) {
  if (name == "log1p") {
    return CustomEvaluator{
        "log1p", [](double x) { return std::log1p(x); }, [](cplx z) { return log1p_any(z); },
        [](double x) { return 1.0 / (1.0 + x); }, [](cplx z) { return 1.0 / (1.0 + z); }};
  }
  if (name == "square") {
    return CustomEvaluator{"square", [](double x) { return x * x; }, [](cplx z) { return z * z; },
                           [](double x) { return 2 * x; }, [](cplx z) { return 2.0 * z; }};
  }
  return std::nullopt;
}

std::vector<std::string> builtin_custom_names() { return {"log1p", "square"}; }

namespace {

struct Range {
  const char* name;
  double lo, hi;
};

void require_open(double v, const Range& r, const std::string& fam) {
  if (!(v > r.lo && v < r.hi)) {
    std::ostringstream ss;
    ss << fam << ": parameter " << r.name << "=" << v << " must lie in (" << r.lo << ", " << r.hi
       << ")";
    throw DomainError(ss.str());
  }
}

double get_param(const ParamMap& p, const char* name, const std::string& fam) {
  auto it = p.find(name);
  if (it == p.end()) throw DomainError(fam + ": missing parameter '" + name + "'");
  if (!std::isfinite(it->second)) throw DomainError(fam + ": parameter '" + name + "' not finite");
  return it->second;
}

void check_no_extra(const ParamMap& p, std::initializer_list<const char*> allowed,
                    const std::string& fam) {
  for (const auto& [k, v] : p) {
    bool ok = false;
    for (auto* a : allowed) ok = ok || k == a;
    if (!ok) throw DomainError(fam + ": unknown parameter '" + k + "'");
  }
}

}  // namespace

BernsteinSpec::BernsteinSpec(std::shared_ptr<const detail::PhiModel> model, bool normalize,
                             json descriptor)
    : model_(std::move(model)), normalize_(normalize), descriptor_(std::move(descriptor)) {
  if (descriptor_.contains("params"))
    for (auto it = descriptor_["params"].begin(); it != descriptor_["params"].end(); ++it)
      params_[it.key()] = it.value().get<double>();
  if (normalize_) {
    long double r1 = model_->value(1.0L);
    quad rq = model_->value(static_cast<quad>(1));
    scale_q_ = 1 / rq;
    double r1d = model_->value(1.0);
    if (!(r1d > 0) || !std::isfinite(r1d))
      throw DomainError("cannot normalize: raw value at 1 is " + fmt_double(r1d));
    scale_ = 1.0 / r1d;
    scale_ld_ = 1.0L / r1;
  }
}

BernsteinSpec BernsteinSpec::make(Family f, const ParamMap& p, bool normalize) {
  const std::string fam = family_name(f);
  double a = 0, b = 0;
  switch (f) {
    case Family::pure_power:
      check_no_extra(p, {"alpha"}, fam);
      a = get_param(p, "alpha", fam);
      require_open(a, {"alpha", 0, 2}, fam);
      break;
    case Family::sum_of_powers:
      check_no_extra(p, {"alpha", "beta"}, fam);
      a = get_param(p, "alpha", fam);
      b = get_param(p, "beta", fam);
      require_open(a, {"alpha", 0, 1}, fam);
      require_open(b, {"beta", a, 1}, fam);
      break;
    case Family::power_of_shifted:
      check_no_extra(p, {"alpha", "beta"}, fam);
      a = get_param(p, "alpha", fam);
      b = get_param(p, "beta", fam);
      require_open(a, {"alpha", 0, 1}, fam);
      require_open(b, {"beta", 0, 1}, fam);
      break;
    case Family::power_log:
      check_no_extra(p, {"alpha", "beta"}, fam);
      a = get_param(p, "alpha", fam);
      b = get_param(p, "beta", fam);
      require_open(a, {"alpha", 0, 1}, fam);
      require_open(b, {"beta", 0, 1 - a}, fam);
      break;
    case Family::power_over_log:
      check_no_extra(p, {"alpha", "beta"}, fam);
      a = get_param(p, "alpha", fam);
      b = get_param(p, "beta", fam);
      require_open(a, {"alpha", 0, 1}, fam);
      require_open(b, {"beta", 0, a}, fam);
      break;
    case Family::log_cosh:
    case Family::log_sinh:
      check_no_extra(p, {"alpha"}, fam);
      a = get_param(p, "alpha", fam);
      require_open(a, {"alpha", 0, 1}, fam);
      break;
    case Family::custom:
      throw DomainError("custom family needs an evaluator; use BernsteinSpec::custom");
  }
  json params = json::object();
  for (const auto& [k, v] : p) params[k] = v;
  json desc = {{"family", fam}, {"params", params}, {"normalize", normalize}};
  BernsteinSpec s(std::make_shared<detail::FamilyModel>(f, a, b), normalize, std::move(desc));
  return s;
}

BernsteinSpec BernsteinSpec::pure_power(double alpha) {
  return make(Family::pure_power, {{"alpha", alpha}});
}
BernsteinSpec BernsteinSpec::sum_of_powers(double a, double b) {
  return make(Family::sum_of_powers, {{"alpha", a}, {"beta", b}});
}
BernsteinSpec BernsteinSpec::power_of_shifted(double a, double b) {
  return make(Family::power_of_shifted, {{"alpha", a}, {"beta", b}});
}
BernsteinSpec BernsteinSpec::power_log(double a, double b) {
  return make(Family::power_log, {{"alpha", a}, {"beta", b}});
}
BernsteinSpec BernsteinSpec::power_over_log(double a, double b) {
  return make(Family::power_over_log, {{"alpha", a}, {"beta", b}});
}
BernsteinSpec BernsteinSpec::log_cosh(double a) { return make(Family::log_cosh, {{"alpha", a}}); }
BernsteinSpec BernsteinSpec::log_sinh(double a) { return make(Family::log_sinh, {{"alpha", a}}); }

BernsteinSpec BernsteinSpec::custom(CustomEvaluator ev, bool normalize) {
  if (!ev.value) throw DomainError("custom evaluator needs a value function");
  if (ev.name.empty()) ev.name = "anonymous";
  json desc = {{"family", "custom"}, {"evaluator", ev.name}, {"normalize", normalize}};
  return BernsteinSpec(std::make_shared<detail::CustomModel>(std::move(ev)), normalize,
                       std::move(desc));
}

BernsteinSpec BernsteinSpec::from_json(const json& j) {
  if (!j.is_object()) throw DomainError("spec must be a JSON object");
  if (!j.contains("family") || !j["family"].is_string())
    throw DomainError("spec needs a string field 'family'");
  const std::string name = j["family"].get<std::string>();
  auto fam = family_from_name(name);
  if (!fam) {
    std::string all;
    for (auto& n : family_names()) all += (all.empty() ? "" : ", ") + n;
    throw DomainError("unknown family '" + name + "'; valid families: " + all);
  }
  bool normalize = true;
  if (j.contains("normalize")) {
    if (!j["normalize"].is_boolean()) throw DomainError("'normalize' must be a boolean");
    normalize = j["normalize"].get<bool>();
  }
  if (*fam == Family::custom) {
    if (j.contains("derived")) {
      const std::string kind = j["derived"].get<std::string>();
      if (!j.contains("of")) throw DomainError("derived spec needs 'of'");
      BernsteinSpec base = from_json(j["of"]);
      if (kind == "conjugate") return conjugate(base);
      if (kind == "rescale") {
        if (!j.contains("a") || !j["a"].is_number()) throw DomainError("rescale needs numeric 'a'");
        return rescale(base, j["a"].get<double>());
      }
      throw DomainError("unknown derived kind '" + kind + "' (conjugate, rescale)");
    }
    if (!j.contains("evaluator") || !j["evaluator"].is_string())
      throw DomainError("custom spec needs a string 'evaluator'");
    const std::string ev = j["evaluator"].get<std::string>();
    auto b = builtin_custom(ev);
    if (!b) {
      std::string all;
      for (auto& n : builtin_custom_names()) all += (all.empty() ? "" : ", ") + n;
      throw DomainError("unknown custom evaluator '" + ev + "'; available: " + all);
    }
    return custom(*b, normalize);
  }
  ParamMap p;
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw DomainError("'params' must be an object");
    for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
      if (!it.value().is_number()) throw DomainError("parameter '" + it.key() + "' must be numeric");
      p[it.key()] = it.value().get<double>();
    }
  }
  return make(*fam, p, normalize);
}

json BernsteinSpec::to_json() const { return descriptor_; }

std::string BernsteinSpec::id() const { return hex64(fnv1a64(descriptor_.dump())); }

std::string BernsteinSpec::label() const {
  const std::string fam = descriptor_.value("family", "custom");
  if (descriptor_.contains("derived")) {
    std::string inner = BernsteinSpec::from_json(descriptor_["of"]).label();
    if (descriptor_["derived"] == "conjugate") return "conjugate(" + inner + ")";
    return "rescale(" + inner + ", a=" + fmt_double(descriptor_["a"].get<double>()) + ")";
  }
  if (descriptor_.contains("evaluator"))
    return "custom(" + descriptor_["evaluator"].get<std::string>() + ")";
  std::string s = fam + "(";
  bool first = true;
  for (auto it = descriptor_["params"].begin(); it != descriptor_["params"].end(); ++it) {
    s += (first ? "" : ",") + it.key() + "=" + fmt_double(it.value().get<double>());
    first = false;
  }
  return s + ")";
}

Family BernsteinSpec::family() const {
  return family_from_name(descriptor_.value("family", "custom")).value_or(Family::custom);
}

const ParamMap& BernsteinSpec::params() const { return params_; }

double BernsteinSpec::param(const std::string& name) const {
  if (!descriptor_.contains("params") || !descriptor_["params"].contains(name))
    throw DomainError(label() + " has no parameter '" + name + "'");
  return descriptor_["params"][name].get<double>();
}

double BernsteinSpec::operator()(double x) const { return scale_ * model_->value(x); }
long double BernsteinSpec::operator()(long double x) const { return scale_ld_ * model_->value(x); }
quad BernsteinSpec::operator()(quad x) const { return scale_q_ * model_->value(x); }
cplx BernsteinSpec::operator()(cplx x) const { return scale_ * model_->value(x); }
double BernsteinSpec::derivative(double x) const { return scale_ * model_->deriv(x); }
long double BernsteinSpec::derivative(long double x) const { return scale_ld_ * model_->deriv(x); }
quad BernsteinSpec::derivative(quad x) const { return scale_q_ * model_->deriv(x); }
cplx BernsteinSpec::derivative(cplx x) const { return scale_ * model_->deriv(x); }
double BernsteinSpec::raw(double x) const { return model_->value(x); }
bool BernsteinSpec::has_complex() const { return model_->has_complex(); }
bool BernsteinSpec::has_quad() const { return model_->has_quad(); }
bool BernsteinSpec::has_closed_form_derivative() const { return model_->closed_derivative(); }
std::optional<double> BernsteinSpec::exact_power() const { return model_->exact_power(); }

// ---------------------------------------------------------------------------

namespace {
void require_positive(double x, const char* what) {
  if (!(x > 0) || !std::isfinite(x))
    throw DomainError(std::string(what) + " must be positive and finite, got " + fmt_double(x));
}
}  // namespace

double eval_phi(const BernsteinSpec& spec, double lambda) {
  require_positive(lambda, "lambda");
  return spec(lambda);
}

double eval_phi_prime(const BernsteinSpec& spec, double lambda, const QuadratureConfig& cfg) {
  require_positive(lambda, "lambda");
  double d;
  if (spec.has_closed_form_derivative()) {
    d = spec.derivative(lambda);
  } else {
    const double h = cfg.fd_rel_step * lambda;
    d = (spec(lambda + h) - spec(lambda - h)) / (2 * h);
  }
  if (!(d > 0))
    throw ConvergenceError("derivative of " + spec.label() + " at " + fmt_double(lambda) +
                           " is not positive (" + fmt_double(d) + ")");
  return d;
}

BernsteinSpec conjugate(const BernsteinSpec& spec) {
  json desc = {{"family", "custom"}, {"derived", "conjugate"}, {"of", spec.to_json()}, {"normalize", true}};
  return BernsteinSpec(std::make_shared<detail::ConjugateModel>(spec), true, std::move(desc));
}

BernsteinSpec rescale(const BernsteinSpec& spec, double a) {
  require_positive(a, "rescale factor a");
  json desc = {{"family", "custom"}, {"derived", "rescale"}, {"a", a}, {"of", spec.to_json()}, {"normalize", true}};
  return BernsteinSpec(std::make_shared<detail::RescaleModel>(spec, a), true, std::move(desc));
}

double capital_phi(const BernsteinSpec& spec, double r) {
  require_positive(r, "r");
  return 1.0 / spec(1.0 / (r * r));
}

double capital_phi_inv(const BernsteinSpec& spec, double t, const QuadratureConfig& cfg) {
  require_positive(t, "t");
  if (auto p = spec.exact_power(); p && spec.normalized()) return std::pow(t, 1.0 / (2 * *p));
  const double lt = std::log(t);
  // g(x) = log Phi(e^x) - log t, increasing in x
  auto g = [&](double x) { return -std::log(spec(std::exp(-2 * x))) - lt; };
  double lo = cfg.phi_inv_log10_lo * std::numbers::ln10;
  double hi = cfg.phi_inv_log10_hi * std::numbers::ln10;
  double glo = g(lo), ghi = g(hi);
  if (!(glo <= 0 && ghi >= 0))
    throw ConvergenceError("Phi^{-1}(" + fmt_double(t) + ") not bracketed by r in [1e" +
                           fmt_double(cfg.phi_inv_log10_lo) + ", 1e" +
                           fmt_double(cfg.phi_inv_log10_hi) + "]");
  if (glo == 0) return std::exp(lo);
  if (ghi == 0) return std::exp(hi);
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::fabs(b - a) <= 1e-14 * std::max(1.0, std::fabs(a)); };
  auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
  if (iters >= 200) throw ConvergenceError("Phi^{-1} root finder did not converge");
  return std::exp(0.5 * (a + b));
}

std::vector<double> log_grid(double lo, double hi, double ppd) {
  if (!(lo > 0) || !(hi >= lo) || !(ppd > 0)) throw DomainError("bad log grid bounds");
  const double decades = std::log10(hi / lo);
  const auto n = static_cast<std::size_t>(std::llround(decades * ppd));
  std::vector<double> g;
  g.reserve(n + 1);
  if (n == 0) return {lo};
  for (std::size_t i = 0; i <= n; ++i)
    g.push_back(i == n ? hi : lo * std::pow(10.0, decades * static_cast<double>(i) / n));
  return g;
}

// ---------------------------------------------------------------------------

std::string to_string(ScalingSide s) { return s == ScalingSide::at_zero ? "at_zero" : "at_infinity"; }

namespace {

double local_slope(const BernsteinSpec& spec, double x) {
  const double h = 1e-3;
  return (std::log(spec(x * std::exp(h))) - std::log(spec(x * std::exp(-h)))) / (2 * h);
}

struct Extremes {
  double a_lower, a_upper;
};

// min / max over pairs i<j of (L_j - L_i) - delta (x_j - x_i), exponentiated.
Extremes extremal_constants(const std::vector<double>& lx, const std::vector<double>& lphi,
                            double dlo, double dhi) {
  double best_lo = 0, best_hi = 0;
  double max_clo = -INFINITY, min_chi = INFINITY;
  bool first = true;
  for (std::size_t j = 0; j < lx.size(); ++j) {
    double clo = lphi[j] - dlo * lx[j];
    double chi = lphi[j] - dhi * lx[j];
    if (j > 0) {
      double vlo = clo - max_clo, vhi = chi - min_chi;
      if (first) {
        best_lo = vlo;
        best_hi = vhi;
        first = false;
      } else {
        best_lo = std::min(best_lo, vlo);
        best_hi = std::max(best_hi, vhi);
      }
    }
    max_clo = std::max(max_clo, clo);
    min_chi = std::min(min_chi, chi);
  }
  return {std::exp(best_lo), std::exp(best_hi)};
}

}  // namespace

SideFit fit_scaling_side(const BernsteinSpec& spec, double r_min, double r_max, ScalingSide side,
                         const ScalingOptions& opt) {
  if (!(r_min > 0) || !(r_max > r_min)) throw DomainError("need 0 < r_min < r_max");
  double lo = r_min, hi = r_max;
  if (side == ScalingSide::at_infinity) lo = std::max(lo, 1.0);
  else hi = std::min(hi, 1.0);
  if (!(hi / lo >= 10))
    throw DomainError(to_string(side) + ": grid must span at least one decade on its side of 1");

  auto grid = log_grid(lo, hi, opt.points_per_decade);
  std::vector<double> lx(grid.size()), lp(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double v = spec(grid[i]);
    if (!(v > 0) || !std::isfinite(v)) {
      throw CertificationError("certification failed " + to_string(side) + ": phi(" +
                               fmt_double(grid[i]) + ") = " + fmt_double(v) + " is not positive");
    }
    lx[i] = std::log(grid[i]);
    lp[i] = std::log(v);
  }

  SideFit f;
  f.side = side;
  f.r_min = lo;
  f.r_max = hi;
  f.points = grid.size();
  f.points_per_decade = opt.points_per_decade;
  f.delta_lower = INFINITY;
  f.delta_upper = -INFINITY;
  // Chord slopes are weighted means of adjacent slopes, so adjacent pairs
  // carry the extremes over all pairs.
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    double s = (lp[i + 1] - lp[i]) / (lx[i + 1] - lx[i]);
    if (s < f.delta_lower) {
      f.delta_lower = s;
      f.lower_pair_r = grid[i];
      f.lower_pair_R = grid[i + 1];
    }
    if (s > f.delta_upper) {
      f.delta_upper = s;
      f.upper_pair_r = grid[i];
      f.upper_pair_R = grid[i + 1];
    }
  }
  auto ex = extremal_constants(lx, lp, f.delta_lower, f.delta_upper);
  f.a_lower = ex.a_lower;
  f.a_upper = ex.a_upper;

  // Far-end extrapolation of the index.
  const double x2 = side == ScalingSide::at_infinity ? hi : lo;
  const double x1 = side == ScalingSide::at_infinity ? hi / 10 : lo * 10;
  const double s1 = local_slope(spec, x1), s2 = local_slope(spec, x2);
  const double L1 = std::fabs(std::log(x1)), L2 = std::fabs(std::log(x2));
  f.asymptotic_index = (s2 * L2 - s1 * L1) / (L2 - L1);

  auto fail = [&](const std::string& what) {
    std::ostringstream ss;
    ss << "certification failed " << to_string(side) << ": " << what;
    throw CertificationError(ss.str());
  };
  if (!(f.delta_lower > 0)) {
    std::ostringstream ss;
    ss << "min slope " << f.delta_lower << " <= 0 on pair r=" << f.lower_pair_r
       << ", R=" << f.lower_pair_R;
    fail(ss.str());
  }
  if (!(f.delta_upper < 1)) {
    std::ostringstream ss;
    ss << "max slope " << f.delta_upper << " >= 1 on pair r=" << f.upper_pair_r
       << ", R=" << f.upper_pair_R;
    fail(ss.str());
  }
  if (!(f.asymptotic_index >= opt.asymptotic_tol && f.asymptotic_index <= 1 - opt.asymptotic_tol)) {
    std::ostringstream ss;
    ss << "asymptotic index " << f.asymptotic_index << " outside [" << opt.asymptotic_tol << ", "
       << 1 - opt.asymptotic_tol << "] (local slopes " << s1 << " at r=" << x1 << ", " << s2
       << " at r=" << x2 << ")";
    fail(ss.str());
  }
  return f;
}

ScalingCertificate estimate_scaling_indices(const BernsteinSpec& spec, double r_min, double r_max,
                                            ScalingSide side, const ScalingOptions& opt) {
  ScalingCertificate c;
  auto f = fit_scaling_side(spec, r_min, r_max, side, opt);
  (side == ScalingSide::at_infinity ? c.at_infinity : c.at_zero) = f;
  return c;
}

ScalingCertificate certify(const BernsteinSpec& spec, double decades, const ScalingOptions& opt) {
  ScalingCertificate c;
  std::string errors;
  const double span = std::pow(10.0, decades);
  try {
    c.at_infinity = fit_scaling_side(spec, 1.0, span, ScalingSide::at_infinity, opt);
  } catch (const CertificationError& e) {
    errors += e.what();
  }
  try {
    c.at_zero = fit_scaling_side(spec, 1.0 / span, 1.0, ScalingSide::at_zero, opt);
  } catch (const CertificationError& e) {
    errors += (errors.empty() ? "" : "; ") + std::string(e.what());
  }
  if (!errors.empty()) throw CertificationError(errors);

  auto grid = log_grid(1.0 / span, span, opt.points_per_decade);
  std::vector<double> lx(grid.size()), lp(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    lx[i] = std::log(grid[i]);
    lp[i] = std::log(spec(grid[i]));
  }
  auto ex = extremal_constants(lx, lp, c.combined_lower(), c.combined_upper());
  c.a5 = ex.a_lower;
  c.a6 = ex.a_upper;
  return c;
}

namespace {
const SideFit& need(const std::optional<SideFit>& f, const char* what) {
  if (!f) throw DomainError(std::string("certificate has no ") + what + " side");
  return *f;
}
}  // namespace

double ScalingCertificate::delta1() const { return need(at_infinity, "at_infinity").delta_lower; }
double ScalingCertificate::delta2() const { return need(at_infinity, "at_infinity").delta_upper; }
double ScalingCertificate::delta3() const { return need(at_zero, "at_zero").delta_lower; }
double ScalingCertificate::delta4() const { return need(at_zero, "at_zero").delta_upper; }
double ScalingCertificate::combined_lower() const { return std::min(delta1(), delta3()); }
double ScalingCertificate::combined_upper() const { return std::max(delta2(), delta4()); }

json ScalingCertificate::to_json() const {
  json j;
  j["empirical"] = empirical;
  j["note"] = "grid-extremal fit, not a proof";
  auto side = [](const SideFit& f, const char* lo, const char* hi, const char* al, const char* ah) {
    return json{{lo, f.delta_lower},
                {hi, f.delta_upper},
                {al, f.a_lower},
                {ah, f.a_upper},
                {"asymptotic_index", f.asymptotic_index},
                {"grid", {{"r_min", f.r_min}, {"r_max", f.r_max}, {"points", f.points},
                          {"points_per_decade", f.points_per_decade}}},
                {"lower_pair", {f.lower_pair_r, f.lower_pair_R}},
                {"upper_pair", {f.upper_pair_r, f.upper_pair_R}}};
  };
  if (at_infinity) j["at_infinity"] = side(*at_infinity, "delta1", "delta2", "a1", "a2");
  if (at_zero) j["at_zero"] = side(*at_zero, "delta3", "delta4", "a3", "a4");
  if (at_infinity && at_zero) {
    j["combined"] = {{"delta_lower", combined_lower()}, {"delta_upper", combined_upper()},
                     {"a5", a5}, {"a6", a6}};
  }
  return j;
}

// ---------------------------------------------------------------------------

json SanityReport::to_json() const {
  json j = {{"passed", passed}, {"points_checked", points_checked}};
  if (first_violation) {
    const auto& v = *first_violation;
    j["violation"] = {{"check", v.check}, {"lambda", v.lambda}, {"t", v.t}, {"lhs", v.lhs}, {"rhs", v.rhs}};
  }
  return j;
}

SanityReport check_bernstein_sanity(const BernsteinSpec& spec, const std::vector<double>& lambdas,
                                    const std::vector<double>& ts, const QuadratureConfig& cfg) {
  SanityReport rep;
  constexpr double slack = 1e-12;
  auto fail = [&](const char* check, double l, double t, double lhs, double rhs) {
    rep.passed = false;
    rep.first_violation = SanityViolation{check, l, t, lhs, rhs};
    return rep;
  };
  for (double l : lambdas) {
    if (l < 1) continue;
    for (double t : ts) {
      double num = spec(l * t), den = spec(t);
      if (!(num <= l * den * (1 + slack))) return fail("phi_lt_le_l_phi_t", l, t, num, l * den);
    }
  }
  for (double l : lambdas) {
    for (double t : ts) {
      ++rep.points_checked;
      double num = spec(l * t), den = spec(t);
      double q = num / den;
      double lo = std::min(1.0, l), hi = std::max(1.0, l);
      if (!(q >= lo * (1 - slack) && q <= hi * (1 + slack))) {
        return fail("sandwich", l, t, q, q < lo ? lo : hi);
      }
    }
  }
  std::vector<double> all(lambdas);
  all.insert(all.end(), ts.begin(), ts.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    double x = all[i];
    if (!(x > 0)) throw DomainError("sanity grid must be positive");
    double p = spec(x);
    ++rep.points_checked;
    if (!(p > 0)) return fail("positivity", x, 0, p, 0);
    double dp = eval_phi_prime(spec, x, cfg);
    if (!(x * dp <= p * (1 + slack))) return fail("lambda_phiprime_le_phi", x, 0, x * dp, p);
    if (i > 0) {
      double x0 = all[i - 1], p0 = spec(x0);
      if (!(p > p0)) return fail("monotone", x, x0, p, p0);
      if (!(p / x <= (p0 / x0) * (1 + slack))) return fail("phi_over_lambda_nonincreasing", x, x0, p / x, p0 / x0);
    }
  }
  return rep;
}

}  // namespace sbm
