#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svit/datagen.hpp"
#include "svit/metrics.hpp"
#include "svit/model.hpp"
#include "svit/train.hpp"

namespace svit {

// Resolved configuration for every subcommand. Flags and JSON config files
// both land here; the resolved form is echoed into each output file so a run
// is reproducible from its artifacts alone.
struct RunConfig {
    // shared
    std::string out_dir = "out";
    std::uint64_t base_seed = 1;
    std::size_t workers = 1;
    bool with_timing = false;   // put wall times into the CSV (waives byte-equality)
    bool assert_bands = false;  // exit 3 when an expectation band is missed

    // data
    std::size_t image_size = 28;
    PatternTaskConfig pattern;
    ObjectTaskConfig objects;
    std::size_t test_count = 500;

    // models (the two parameter-balanced rivals)
    std::size_t n_tokens = 16;
    std::size_t patch_size = 7;
    std::size_t d_e = 16;
    std::size_t d_ff = 32;
    std::size_t heads = 2;
    std::size_t layers = 2;
    bool shared_embed = false;
    bool embed_bias = false;
    std::string pooling = "mean";
    double tau = 1.0;

    // training
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::string loss = "bce";
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;

    // pattern sweep
    std::vector<std::size_t> n_grid = {10, 32, 100, 316, 1000};
    std::vector<double> snr_list = {1.0, 0.25, 1.0 / 9.0};
    std::size_t seeds = 20;
    double crossover_delta = 0.01;

    // shift experiment
    std::size_t shift_train = 10000;
    std::string shift_basis = "fourier";

    // basis demo
    std::size_t demo_size = 64;
    std::vector<std::size_t> demo_n_grid = {4, 16, 64};
    std::size_t demo_variants = 200;
    double demo_jitter = 0.2;
};

// Merges a JSON config file into defaults (unknown keys are a
// ValidationError). CLI flag overrides are applied by the caller afterwards.
RunConfig load_config_file(const std::string& path, RunConfig base = RunConfig{});
// One-line JSON echo of the resolved config (sorted keys, deterministic).
std::string config_echo(const RunConfig& cfg);

ModelSpec spectral_spec(const RunConfig& cfg, BasisKind basis);
ModelSpec spatial_spec(const RunConfig& cfg);

struct SweepSummary {
    // per snr value, in snr_list order
    std::vector<double> snr;
    std::vector<double> n_star;           // +inf when no crossover on the grid
    std::vector<double> gap_at_first_n;   // spectral - spatial mean AUC at n_grid[0]
    std::vector<double> n_grid;           // ascending, shared by all curves
    std::vector<std::vector<double>> mean_auc_spectral;  // [snr][n]
    std::vector<std::vector<double>> mean_auc_spatial;   // [snr][n]
    std::size_t failed_cells = 0;
    bool bands_checked = false;
    bool bands_ok = true;
    std::vector<std::string> band_failures;
};
SweepSummary run_pattern_sweep(const RunConfig& cfg);

// Evaluates the published expectation bands on a finished sweep: at matched
// capacity the spectral/spatial crossover lands inside [10, 100] at unit
// task difficulty, and at difficulty 1/4 the spectral lead at N = 100 is at
// least 0.05 with no crossover up to N = 316. Only bands whose grid points
// are present are checked. Fills bands_checked / bands_ok / band_failures.
bool check_sweep_bands(SweepSummary& summary);

struct ShiftSummary {
    double spectral_accuracy = 0.0;
    double spatial_accuracy = 0.0;
    double spectral_train_accuracy = 0.0;
    double spatial_train_accuracy = 0.0;
    double position_oracle_train_accuracy = 0.0;
    double position_oracle_test_accuracy = 0.0;
    McNemarResult mcnemar;
    DelongResult delong;
    std::size_t n_train = 0;
};
ShiftSummary run_shift(const RunConfig& cfg);

struct DemoRow {
    std::string basis;
    std::size_t n = 0;
    double psnr_db = 0.0;
    std::optional<double> compaction;  // PCA only
};
std::vector<DemoRow> run_basis_demo(const RunConfig& cfg);

struct CostRow {
    std::size_t m = 0, n = 0, d_e = 0, layers = 0;
    CostBreakdown cost;
    std::uint64_t measured_trans = 0;
    bool exact_match = false;
    std::size_t n_patches = 0;              // 0 when patch size does not divide
    std::uint64_t spatial_trans_per_layer = 0;
};
std::vector<CostRow> run_cost_report(const RunConfig& cfg);

struct AuditCase {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool pass = false;
};
// Gradient audit over every differentiable op plus full-model losses.
// Returns the case list; failures are also counted by the CLI (exit 2).
std::vector<AuditCase> run_grad_audit(const RunConfig& cfg);

// Returns the first n modes of a basis as a standalone basis (the orderings
// are nested, so a prefix is itself the coarser basis).
SpectralBasis basis_prefix(const SpectralBasis& basis, std::size_t n);

}  // namespace svit
