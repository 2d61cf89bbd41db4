// svit: spectral-token vision transformer experiments.
//
// Subcommands
//   pattern-sweep   sample-efficiency curves, spectral vs spatial, over N and snr
//   shift           train/test distribution shift with a spurious position cue
//   basis-demo      phantom reconstructions across bases and mode counts
//   cost-report     closed-form multiply counts checked against measured kernels
//   grad-audit      finite-difference audit of every gradient in the stack
//
// Exit codes: 0 success; 1 invalid input/config; 2 numeric failure (including
// audit gradient mismatches); 3 expectation band missed under --assert.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svit/errors.hpp"
#include "svit/runner.hpp"

namespace {

using svit::RunConfig;

// Bound per-subcommand so each one accepts the full override set; values are
// merged over (defaults <- config file <- explicit flags).
struct FlagSet {
    std::string config_path;
    RunConfig v;  // flag landing zone; only options with count()>0 are merged
    CLI::App* sub = nullptr;

    void merge(RunConfig& cfg) const {
        auto touched = [this](const std::string& name) { return sub->count(name) > 0; };
        if (touched("--out")) cfg.out_dir = v.out_dir;
        if (touched("--seed")) cfg.base_seed = v.base_seed;
        if (touched("--workers")) cfg.workers = v.workers;
        if (touched("--timing")) cfg.with_timing = true;
        if (touched("--assert")) cfg.assert_bands = true;
        if (touched("--image-size")) {
            cfg.image_size = v.image_size;
            cfg.pattern.size = v.image_size;
            cfg.objects.size = v.image_size;
        }
        if (touched("--test-count")) cfg.test_count = v.test_count;
        if (touched("--n-tokens")) cfg.n_tokens = v.n_tokens;
        if (touched("--patch-size")) cfg.patch_size = v.patch_size;
        if (touched("--d-e")) cfg.d_e = v.d_e;
        if (touched("--d-ff")) cfg.d_ff = v.d_ff;
        if (touched("--heads")) cfg.heads = v.heads;
        if (touched("--layers")) cfg.layers = v.layers;
        if (touched("--shared-embed")) cfg.shared_embed = true;
        if (touched("--embed-bias")) cfg.embed_bias = true;
        if (touched("--pooling")) cfg.pooling = v.pooling;
        if (touched("--tau")) cfg.tau = v.tau;
        if (touched("--epochs")) cfg.epochs = v.epochs;
        if (touched("--batch-size")) cfg.batch_size = v.batch_size;
        if (touched("--lr")) cfg.lr = v.lr;
        if (touched("--loss")) cfg.loss = v.loss;
        if (touched("--focal-gamma")) cfg.focal_gamma = v.focal_gamma;
        if (touched("--focal-alpha")) cfg.focal_alpha = v.focal_alpha;
        if (touched("--n-grid")) cfg.n_grid = v.n_grid;
        if (touched("--snr")) cfg.snr_list = v.snr_list;
        if (touched("--seeds")) cfg.seeds = v.seeds;
        if (touched("--crossover-delta")) cfg.crossover_delta = v.crossover_delta;
        if (touched("--shift-train")) cfg.shift_train = v.shift_train;
        if (touched("--shift-basis")) cfg.shift_basis = v.shift_basis;
        if (touched("--demo-size")) cfg.demo_size = v.demo_size;
        if (touched("--demo-n-grid")) cfg.demo_n_grid = v.demo_n_grid;
        if (touched("--demo-variants")) cfg.demo_variants = v.demo_variants;
        if (touched("--demo-jitter")) cfg.demo_jitter = v.demo_jitter;
    }
};

FlagSet* add_common(CLI::App* sub) {
    auto* f = new FlagSet;  // lives for the whole process
    f->sub = sub;
    sub->add_option("--config", f->config_path, "JSON config file (flags override it)");
    sub->add_option("--out", f->v.out_dir, "output directory");
    sub->add_option("--seed", f->v.base_seed, "base seed");
    sub->add_option("--workers", f->v.workers, "worker threads for independent cells");
    sub->add_flag("--timing", "record wall time in the CSV (waives byte-reproducibility)");
    sub->add_flag("--assert", "exit 3 when an expectation band is missed");
    sub->add_option("--image-size", f->v.image_size, "synthetic image side");
    sub->add_option("--test-count", f->v.test_count, "withheld evaluation set size");
    sub->add_option("--n-tokens", f->v.n_tokens, "retained spectral modes");
    sub->add_option("--patch-size", f->v.patch_size, "spatial patch side");
    sub->add_option("--d-e", f->v.d_e, "embedding width");
    sub->add_option("--d-ff", f->v.d_ff, "feed-forward width");
    sub->add_option("--heads", f->v.heads, "attention heads");
    sub->add_option("--layers", f->v.layers, "encoder layers");
    sub->add_flag("--shared-embed", "share one embedding map across modes");
    sub->add_flag("--embed-bias", "per-mode embedding bias");
    sub->add_option("--pooling", f->v.pooling, "mean|class_token")
        ->check(CLI::IsMember({"mean", "class_token"}));
    sub->add_option("--tau", f->v.tau, "diffusion scale for the graph basis");
    sub->add_option("--epochs", f->v.epochs, "training epochs");
    sub->add_option("--batch-size", f->v.batch_size, "minibatch size");
    sub->add_option("--lr", f->v.lr, "Adam learning rate");
    sub->add_option("--loss", f->v.loss, "bce|focal")->check(CLI::IsMember({"bce", "focal"}));
    sub->add_option("--focal-gamma", f->v.focal_gamma, "focal focusing exponent");
    sub->add_option("--focal-alpha", f->v.focal_alpha, "focal class weight");
    sub->add_option("--n-grid", f->v.n_grid, "training sizes (comma separated)")
        ->delimiter(',');
    sub->add_option("--snr", f->v.snr_list, "pattern task difficulty list")->delimiter(',');
    sub->add_option("--seeds", f->v.seeds, "seed replicates per cell");
    sub->add_option("--crossover-delta", f->v.crossover_delta, "advantage cutoff for N*");
    sub->add_option("--shift-train", f->v.shift_train, "shift experiment training size");
    sub->add_option("--shift-basis", f->v.shift_basis, "pca|fourier|laplacian")
        ->check(CLI::IsMember({"pca", "fourier", "laplacian"}));
    sub->add_option("--demo-size", f->v.demo_size, "phantom side");
    sub->add_option("--demo-n-grid", f->v.demo_n_grid, "demo mode counts")->delimiter(',');
    sub->add_option("--demo-variants", f->v.demo_variants, "phantoms in the demo PCA fit");
    sub->add_option("--demo-jitter", f->v.demo_jitter, "demo intensity jitter");
    return f;
}

RunConfig resolve(const FlagSet& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = svit::load_config_file(f.config_path, cfg);
    f.merge(cfg);
    return cfg;
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral-token vision transformer experiments"};
    app.require_subcommand(1);

    CLI::App* sweep = app.add_subcommand("pattern-sweep",
                                         "sample-efficiency curves over N and task snr");
    CLI::App* shift = app.add_subcommand("shift", "spurious-cue distribution shift comparison");
    CLI::App* demo = app.add_subcommand("basis-demo", "phantom reconstruction demo");
    CLI::App* cost = app.add_subcommand("cost-report", "multiply-count accounting check");
    CLI::App* audit = app.add_subcommand("grad-audit", "finite-difference gradient audit");
    FlagSet* sweep_f = add_common(sweep);
    FlagSet* shift_f = add_common(shift);
    FlagSet* demo_f = add_common(demo);
    FlagSet* cost_f = add_common(cost);
    FlagSet* audit_f = add_common(audit);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // app.exit prints the diagnostic (or help text) but reports the
        // library's own exit codes; fold every parse failure into the
        // documented invalid-input code and keep --help/--version at 0.
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sweep->parsed()) {
            const RunConfig cfg = resolve(*sweep_f);
            const svit::SweepSummary s = svit::run_pattern_sweep(cfg);
            for (std::size_t i = 0; i < s.snr.size(); ++i) {
                std::printf("snr=%-8g n*=%-10s advantage@N%zu=%s\n", s.snr[i],
                            std::isfinite(s.n_star[i]) ? num(s.n_star[i]).c_str() : "inf",
                            static_cast<std::size_t>(s.n_grid.front()),
                            num(s.gap_at_first_n[i]).c_str());
            }
            if (s.failed_cells > 0)
                std::printf("failed cells: %zu (see errors.log)\n", s.failed_cells);
            if (cfg.assert_bands && !s.bands_ok) {
                for (const std::string& msg : s.band_failures)
                    std::fprintf(stderr, "band missed: %s\n", msg.c_str());
                return 3;
            }
            return 0;
        }
        if (shift->parsed()) {
            const svit::ShiftSummary s = svit::run_shift(resolve(*shift_f));
            std::printf("spectral  test acc %s (train %s)\n", num(s.spectral_accuracy).c_str(),
                        num(s.spectral_train_accuracy).c_str());
            std::printf("spatial   test acc %s (train %s)\n", num(s.spatial_accuracy).c_str(),
                        num(s.spatial_train_accuracy).c_str());
            std::printf("position-rule oracle test acc %s (train %s)\n",
                        num(s.position_oracle_test_accuracy).c_str(),
                        num(s.position_oracle_train_accuracy).c_str());
            std::printf("mcnemar b01=%zu b10=%zu p=%g (%s)\n", s.mcnemar.b01, s.mcnemar.b10,
                        s.mcnemar.p, s.mcnemar.exact ? "exact" : "chi-square");
            std::printf("delong auc %s vs %s p=%g%s\n", num(s.delong.auc_a).c_str(),
                        num(s.delong.auc_b).c_str(), s.delong.p,
                        s.delong.degenerate ? " (degenerate)" : "");
            return 0;
        }
        if (demo->parsed()) {
            const auto rows = svit::run_basis_demo(resolve(*demo_f));
            for (const auto& r : rows) {
                std::printf("%-10s n=%-4zu psnr=%8.3f dB", r.basis.c_str(), r.n, r.psnr_db);
                if (r.compaction) std::printf("  retained/residual=%.4f", *r.compaction);
                std::printf("\n");
            }
            return 0;
        }
        if (cost->parsed()) {
            const auto rows = svit::run_cost_report(resolve(*cost_f));
            bool all_match = true;
            for (const auto& r : rows) {
                std::printf("m=%-5zu n=%-3zu d_e=%-3zu attn/layer=%-8llu measured=%-8llu %s\n",
                            r.m, r.n, r.d_e,
                            static_cast<unsigned long long>(r.cost.cost_trans_per_layer),
                            static_cast<unsigned long long>(r.measured_trans),
                            r.exact_match ? "exact" : "MISMATCH");
                all_match = all_match && r.exact_match;
            }
            if (!all_match) {
                std::fprintf(stderr, "measured multiply counts deviate from the closed form\n");
                return 2;
            }
            return 0;
        }
        if (audit->parsed()) {
            const auto cases = svit::run_grad_audit(resolve(*audit_f));
            std::size_t failures = 0;
            for (const auto& c : cases) {
                std::printf("%-38s max_rel_err=%.3e  (tol %.0e)  %s\n", c.name.c_str(),
                            c.max_rel_err, c.threshold, c.pass ? "ok" : "FAIL");
                failures += c.pass ? 0 : 1;
            }
            if (failures > 0) {
                std::fprintf(stderr, "%zu gradient case(s) above tolerance\n", failures);
                return 2;
            }
            return 0;
        }
    } catch (const svit::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const svit::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
