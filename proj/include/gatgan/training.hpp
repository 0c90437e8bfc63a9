#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gatgan/layers.hpp"
#include "gatgan/model.hpp"
#include "gatgan/rng.hpp"
#include "gatgan/tensor.hpp"

namespace gatgan {

struct TrainingConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    double lr_encoder = 2e-2;
    double lr_decoder = 2e-2;
    double lr_discriminator = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double flip_prob = 0.05;        // per-minibatch label swap in disc updates
    double noise_std = 0.1;         // encoder input perturbation
    double lambda_r = 5.0;          // reconstruction weight
    std::uint64_t seed = 99;
    std::size_t log_every = 10;
    std::size_t checkpoint_every = 50;
    bool skip_reconstruction_phase = false;  // reconstruction-free ablation

    void validate() const;
};

struct LossRecord {
    std::size_t epoch = 0;
    double recon = 0.0;          // reconstruction term, unweighted
    double gen = 0.0;            // adversarial + weighted reconstruction
    double disc = 0.0;
    double disc_accuracy = 0.0;  // pre-flip classification accuracy
    double seconds = 0.0;
};

// Mean over sequences of the per-sequence L2 norm of (x - xbar).
Tensor reconstruction_loss(const Tensor& x, const Tensor& xbar);

// One Bernoulli(flip_prob) draw deciding whether the real/fake target roles
// swap for this discriminator minibatch.
bool flip_labels(double flip_prob, Rng& rng);

// -mean(log s) + lambda_r * recon; scores must lie in (0,1).
Tensor generator_loss(const Tensor& scores_posterior, const Tensor& recon, double lambda_r);

// -mean(log s_real) - mean(log(1 - s_fake)).
Tensor discriminator_loss(const Tensor& scores_prior, const Tensor& scores_posterior);

// Bias-corrected Adam over a fixed parameter list. Gradients are consumed
// (zeroed) by step(); parameters without gradients decay their moments.
class Adam {
public:
    Adam(ParamList params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    void zero_grad();

    double lr;
    std::size_t step_count() const { return t_; }

    struct Slot {
        Tensor m, v;
    };
    std::vector<Slot>& slots() { return slots_; }
    ParamList& params() { return params_; }

private:
    ParamList params_;
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

// Called after checkpoint-worthy epochs (periodic cadence, new best
// reconstruction, or the final epoch); returns the path written so a
// divergence abort can name the last good snapshot.
using CheckpointFn =
    std::function<std::string(GatGanModel&, std::size_t epoch, bool is_best)>;

// Two-phase trainer: phase 1 fits encoder+decoder to the reconstruction
// objective; phase 2 updates the discriminator on prior-vs-posterior scores
// (with stochastic label flipping), then the encoder on the non-saturating
// adversarial loss.
class Trainer {
public:
    Trainer(GatGanModel& model, TrainingConfig cfg);

    LossRecord step(const Tensor& batch);

    // Epoch loop with shuffled minibatches; records are per-epoch averages.
    std::vector<LossRecord> run(const Tensor& windows, CheckpointFn checkpoint = nullptr);

    const TrainingConfig& config() const { return cfg_; }
    GatGanModel& model() { return model_; }

private:
    GatGanModel& model_;
    TrainingConfig cfg_;
    // The encoder keeps separate optimizer state for its two objectives so
    // the adaptive moments of one cannot rescale the other's updates.
    Adam enc_opt_, dec_opt_, disc_opt_, adv_opt_;
    Rng rng_shuffle_, rng_noise_, rng_flip_, rng_prior_;
    std::string last_checkpoint_;
};

// Convenience wrapper constructing a Trainer and running it.
std::vector<LossRecord> train_loop(GatGanModel& model, const Tensor& windows,
                                   const TrainingConfig& cfg, CheckpointFn checkpoint = nullptr);

// Loss log serialization: header epoch,recon,gen,disc,disc_accuracy,seconds.
std::string loss_log_csv(const std::vector<LossRecord>& records);

}  // namespace gatgan
