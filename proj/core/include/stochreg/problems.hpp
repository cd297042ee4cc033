#pragma once

#include "stochreg/linalg.hpp"
#include "stochreg/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace stochreg {

struct ProblemInstance {
  std::string name;
  DesignMatrix A;
  Vector x_dag;
  Vector y_dag;
  Vector x0;
  double nu = 0.0;
  bool preconditioned = false;

  std::size_t n() const noexcept { return A.n(); }
  std::size_t m() const noexcept { return A.m(); }
};

struct NoisyData {
  Vector y_delta;
  double delta = 0.0;
  double delta_bar = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

struct SourceElement {
  Vector w;
  double nu = 0.0;
  double residual = 0.0;
  double norm_w = 0.0;
};

// Builds an instance with y_dag = A x_dag (kernel matvec) and x0 = 0 unless given.
ProblemInstance make_instance(std::string name, RowMatrix A, Vector x_dag, Vector x0 = {});

ProblemInstance gen_shaw(std::size_t n);
ProblemInstance gen_gravity(std::size_t n, double d = 0.25);
ProblemInstance gen_phillips(std::size_t n);
double phillips_phi(double x) noexcept;
double shaw_kernel(double s, double t) noexcept;
double shaw_solution(double t) noexcept;

// "s-shaw" | "s-gravity" | "s-phillips" (the "s-" prefix is optional).
ProblemInstance generate_problem(const std::string& name, std::size_t n);

// x_dag <- (A^t A)^nu x_e / |(A^t A)^nu x_e|_inf, evaluated spectrally.
ProblemInstance smooth_solution(const ProblemInstance& inst, double nu);

// w = B^-nu (x_dag - x0) with truncated spectral inversion.
SourceElement source_element(const ProblemInstance& inst, double nu);
SourceElement source_element(const ProblemInstance& inst, const GramOperator& B, double nu);

// y_i = y_dag_i + epsilon |y_dag|_inf xi_i with xi from the noise stream of seed.
NoisyData add_noise(const ProblemInstance& inst, double epsilon, std::uint64_t seed);
NoisyData make_data(const ProblemInstance& inst, Vector y_delta, double epsilon, std::uint64_t seed);

struct PreconditionedSystem {
  ProblemInstance inst;
  Vector y;
};

// A~ = Sigma V^t (n x m), y~ = U^t y, y_dag~ = U^t y_dag.
PreconditionedSystem precondition(const ProblemInstance& inst, const Vector& y);
// Same transform applied to a NoisyData record; delta is recomputed.
NoisyData precondition_data(const ProblemInstance& inst, const NoisyData& data, ProblemInstance* out_inst);

// A / sqrt(|B|), so that the scaled Gram operator has norm 1.
ProblemInstance normalize(const ProblemInstance& inst);

}  // namespace stochreg
