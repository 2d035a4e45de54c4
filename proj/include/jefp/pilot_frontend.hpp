// Trainable downlink pilots and the pilot pass y = h^T p + n.
//
// Pilots live in a real tensor [L, M, Nt, 2] (symbol, pilot subcarrier,
// antenna, re/im). Each symbol slice is rescaled so that
// (1/M) sum_m ||p_m||^2 = 1.
#pragma once

#include <cstdint>
#include <vector>

#include "jefp/channel_model.hpp"
#include "jefp/nn.hpp"

namespace jefp {

// m * g for m = 0 .. floor(nc / g) - 1
std::vector<std::size_t> pilot_indices(std::size_t nc, std::size_t g);

// raw [L, M, Nt, 2] -> same shape meeting the per-symbol power constraint.
Var project_pilot_power(const Var& raw);

// Complex view of a projected pilot tensor: one [M, Nt] matrix per symbol.
std::vector<CMatrix> pilot_symbols(const Var& pilots);
Var pilots_from_symbols(const std::vector<CMatrix>& symbols);

class PilotBook : public Module {
 public:
  PilotBook() = default;
  // Unit-variance complex Gaussian init.
  PilotBook(std::size_t nc, std::size_t g, std::size_t nt, std::size_t l, Rng& rng);
  // Fixed pilots from given raw values (projected on use).
  PilotBook(std::size_t nc, std::size_t g, const std::vector<CMatrix>& symbols, bool trainable);

  Var forward() const { return project_pilot_power(raw.var); }
  void collect(ParamList& out, const std::string& prefix) override;

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t m() const { return indices_.size(); }
  std::size_t nt() const { return raw.var.dim(2); }
  std::size_t l() const { return raw.var.dim(0); }

  Parameter raw;  // [L, M, Nt, 2]

 private:
  std::vector<std::size_t> indices_;
};

// Symbol l transmits DFT column (l mod Nt) on every pilot subcarrier.
PilotBook dft_pilotbook(std::size_t nc, std::size_t g, std::size_t nt, std::size_t l);

// Noiseless batched pass. h: [N, Nc, Nt, 2], pilots: [L, M, Nt, 2].
// Returns [N, 2, M, L] (re/im channel first, ready for convolution).
Var pilot_pass(const Var& h, const Var& pilots, const std::vector<std::size_t>& indices);

// Single-user pass with noise of variance sigma_sq drawn from `seed`.
// Returns Y [M, L].
CMatrix downlink_pilot_pass(const CMatrix& h, const std::vector<CMatrix>& pilots,
                            const std::vector<std::size_t>& indices, double sigma_sq,
                            std::uint64_t seed);

// Minimum-norm least squares h_m from Y[m, :] = h_m^T P_m. Returns [M, Nt].
CMatrix ls_oracle_estimate(const CMatrix& y, const std::vector<CMatrix>& pilots);

}  // namespace jefp
