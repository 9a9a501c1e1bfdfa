#pragma once

#include "ringcascade/biotsavart.hpp"
#include "ringcascade/cascade.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ringcascade {

enum class ExperimentKind { Cascade, Sweep, Dichotomy, TnScaling, BsCheck, Lorentz, Coeffs };

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(std::string_view name);

/// Parse or validation failure, located in the manifest text when possible.
class ManifestError : public std::runtime_error {
public:
  ManifestError(const std::string& what, std::string field, int line = -1, int column = -1)
      : std::runtime_error(what), field_(std::move(field)), line_(line), column_(column) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }  // 1-based, -1 when unknown
  int column() const { return column_; }

private:
  std::string field_;
  int line_, column_;
};

struct ModelConfig {
  ModelKind kind = ModelKind::Flattened;
  double L = 50;
  double eta = 0.25;
  double r0 = 1;
  double weight = 1;
  int table_points = 512;
  double quad_rel_tol = 1e-8;
};

struct RunConfig {
  double eps = 1;
  double alpha = 0.2;
  int m = 64;
  double A = 10;
  double mu = 0.05;
  double t_max = 1;
  int sample_stride = 1;
  std::vector<double> output_times;
  bool stop_at_inflation = false;
};

/// Grid axes; an empty axis takes the single value from RunConfig / ModelConfig.
struct SweepConfig {
  std::vector<ModelKind> model;
  std::vector<double> eps, alpha, A, L;
  std::vector<int> m;
  // dichotomy fit
  double fit_t = 1;
  int k_min = 0;  // 0: m / 8
  int k_max = 0;  // 0: m
  // tn-scaling
  double theta = 1;
  double q = 2;
  std::optional<double> cone_margin;  // L = choose_cone_slope(q, theta, margin)
  bool alpha_midpoint = false;        // alpha = midpoint of the admissible range
};

struct SnapshotConfig {
  std::vector<Ring> rings;  // explicit snapshot; empty means "from the cascade run"
  double t = 0;             // sample time when built from the run
  double d = kScaleRatio;
  std::vector<std::pair<double, double>> points;
  VelocityOptions velocity;
};

struct LorentzConfig {
  double eps = 1;
  double alpha = 0.6;
  int m = 8;
  double p = 3;
  double q = 2;
  int grid = 48;
  double d = 1e-2;
  double self_convergence_tol = 1e-2;
  std::optional<double> budget_target;
};

struct Manifest {
  ExperimentKind kind = ExperimentKind::Cascade;
  std::string output_dir;  // empty: RINGCASCADE_OUT or "ringcascade-out"
  int workers = 1;
  ModelConfig model;
  RunConfig run;
  IntegratorSettings integrator;
  std::optional<Perturbation> perturbation;
  SweepConfig sweep;
  SnapshotConfig snapshot;
  LorentzConfig lorentz;

  /// Throws ManifestError naming the first invalid field.
  void validate() const;
};

Manifest parse_manifest(const std::string& text);
Manifest load_manifest(const std::filesystem::path& path);

/// Fully resolved manifest, every default spelled out.
nlohmann::json to_json(const Manifest& m);

std::shared_ptr<const CoefficientTable> build_table(const ModelConfig& cfg);

struct GridCell {
  ModelKind model;
  double L, eps, alpha, A;
  int m;
};

/// The run block as a single cell.
GridCell base_cell(const Manifest& m);

/// Cartesian product of the sweep axes in the fixed order
/// model, L, eps, alpha, A, m (last axis fastest).
std::vector<GridCell> expand_grid(const Manifest& m);

/// Run for one grid cell; table must match cell.L for the frozen model.
CascadeRun make_run(const Manifest& m, const GridCell& cell,
                    std::shared_ptr<const CoefficientTable> table);

std::filesystem::path resolve_output_dir(const Manifest& m);

}  // namespace ringcascade
