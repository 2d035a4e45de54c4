// Trainable building blocks: parameters, layers, and the Adam optimizer.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jefp/autograd.hpp"
#include "jefp/ops.hpp"
#include "jefp/rng.hpp"

namespace jefp {

inline constexpr double kLeakySlope = 0.3;

struct Parameter {
  Var var;
  bool trainable = true;

  Parameter() = default;
  Parameter(Shape shape, std::vector<double> values, bool is_trainable = true);

  std::size_t size() const { return var.size(); }
  void zero_grad() { var.get()->grad.clear(); }
};

struct NamedParam {
  std::string name;
  Parameter* param;
};

using ParamList = std::vector<NamedParam>;

// Anything owning parameters lists them (trainable and buffers) under a
// dotted name prefix.
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect(ParamList& out, const std::string& prefix) = 0;

  ParamList parameters(const std::string& prefix = "");
  std::size_t trainable_count();
};

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

class Linear : public Module {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool bias, Rng& rng);
  Var forward(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) override;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Parameter weight;  // [in, out]
  Parameter bias;    // [out] or empty

 private:
  std::size_t in_ = 0, out_ = 0;
};

class Conv2d : public Module {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_ch, std::size_t out_ch, const ConvGeometry& g, Rng& rng);
  Var forward(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) override;

  Parameter weight;  // [out, in, kh, kw]
  Parameter bias;
  ConvGeometry geometry;
};

class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, const ConvGeometry& g, Rng& rng);
  Var forward(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) override;

  Parameter weight;  // [in, out, kh, kw]
  Parameter bias;
  ConvGeometry geometry;
};

class BatchNorm : public Module {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);
  // Training mode folds batch statistics into the running buffers.
  Var forward(const Var& x, bool training);
  void collect(ParamList& out, const std::string& prefix) override;

  Parameter gamma, beta;
  Parameter running_mean, running_var;  // buffers, not trainable
};

class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(ParamList params, Options opt);

  void zero_grad();
  void step();
  double lr() const { return opt_.lr; }
  void set_lr(double lr) { opt_.lr = lr; }
  std::uint64_t steps() const { return t_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  Options opt_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

// He-style normal init scaled for a leaky rectifier with slope kLeakySlope.
std::vector<double> he_normal(std::size_t count, std::size_t fan_in, Rng& rng);

}  // namespace jefp
