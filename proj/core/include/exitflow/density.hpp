#pragma once

#include <span>
#include <vector>

#include "exitflow/errors.hpp"
#include "exitflow/grid.hpp"

namespace exitflow {

/// Time-indexed family of cell-averaged densities on a fixed spatial grid.
/// Cells are centered at grid nodes with volume h^dim.  Mass that has left
/// the domain is tracked per slice so interior mass + exited mass stays 1.
struct DensityPath {
  TimeGrid tg;
  SpaceGrid sg;
  std::vector<double> rho;          // slice-major cell values (mass / cell volume)
  std::vector<double> exited_mass;  // one entry per slice

  double& at(int it, int cell) { return rho[static_cast<size_t>(it) * sg.size() + cell]; }
  double at(int it, int cell) const { return rho[static_cast<size_t>(it) * sg.size() + cell]; }
  std::span<const double> slice(int it) const {
    return {rho.data() + static_cast<size_t>(it) * sg.size(),
            static_cast<size_t>(sg.size())};
  }
  std::span<double> slice(int it) {
    return {rho.data() + static_cast<size_t>(it) * sg.size(),
            static_cast<size_t>(sg.size())};
  }

  double interior_mass(int it) const {
    double m = 0.0;
    for (double v : slice(it)) m += v;
    return m * sg.cell_volume();
  }

  void check_mass_ledger(double tol) const {
    for (int it = 0; it < tg.nt; ++it) {
      const double total = interior_mass(it) + exited_mass[it];
      if (std::abs(total - 1.0) > tol)
        throw UnnormalizedDensity("mass ledger off by " +
                                  std::to_string(total - 1.0) + " at slice " +
                                  std::to_string(it));
    }
  }

  void check_nonnegative() const {
    for (double v : rho)
      if (v < 0.0) throw NegativeDensity("density path has a negative cell");
  }

  static DensityPath zeros(TimeGrid tg, SpaceGrid sg) {
    DensityPath p;
    p.tg = tg;
    p.sg = sg;
    p.rho.assign(static_cast<size_t>(tg.nt) * sg.size(), 0.0);
    p.exited_mass.assign(tg.nt, 0.0);
    return p;
  }

  /// Frozen-in-time path holding one slice constant; the standard
  /// fixed-point initializer.
  static DensityPath frozen(TimeGrid tg, SpaceGrid sg,
                            std::span<const double> cells) {
    DensityPath p = zeros(tg, sg);
    for (int it = 0; it < tg.nt; ++it)
      for (int c = 0; c < sg.size(); ++c) p.at(it, c) = cells[c];
    return p;
  }
};

}  // namespace exitflow
