#include "gatgan/training.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "gatgan/errors.hpp"

namespace gatgan {

void TrainingConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (lr_encoder < 0 || lr_decoder < 0 || lr_discriminator < 0) {
        throw ConfigError("learning rates must be >= 0");
    }
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ConfigError("adam betas must lie in [0,1)");
    }
    if (adam_eps <= 0) throw ConfigError("adam epsilon must be > 0");
    if (flip_prob < 0 || flip_prob > 1) throw ConfigError("flip probability must lie in [0,1]");
    if (noise_std < 0) throw ConfigError("noise scale must be >= 0");
    if (lambda_r < 0) throw ConfigError("reconstruction weight must be >= 0");
}

Tensor reconstruction_loss(const Tensor& x, const Tensor& xbar) {
    if (x.shape() != xbar.shape()) {
        throw DimensionError("reconstruction loss shapes disagree: " + shape_str(x.shape()) +
                             " vs " + shape_str(xbar.shape()));
    }
    if (x.rank() != 3) {
        throw DimensionError("reconstruction loss expects [K,T,F], got " + shape_str(x.shape()));
    }
    Tensor diff = sub(x, xbar);
    Tensor per_seq = reduce(mul(diff, diff), Reduce::sum, {1, 2}, false);  // [K]
    return mean(sqrt(per_seq));
}

bool flip_labels(double flip_prob, Rng& rng) {
    if (flip_prob < 0.0 || flip_prob > 1.0) {
        throw ContractError("flip probability must lie in [0,1]");
    }
    return rng.bernoulli(flip_prob);
}

Tensor generator_loss(const Tensor& scores_posterior, const Tensor& recon, double lambda_r) {
    Tensor adv = mul_scalar(mean(log(add_scalar(scores_posterior, 1e-12))), -1.0);
    return add(adv, mul_scalar(recon, lambda_r));
}

Tensor discriminator_loss(const Tensor& scores_prior, const Tensor& scores_posterior) {
    Tensor real_term = mean(log(add_scalar(scores_prior, 1e-12)));
    Tensor fake_term = mean(log(add_scalar(mul_scalar(scores_posterior, -1.0), 1.0 + 1e-12)));
    return mul_scalar(add(real_term, fake_term), -1.0);
}

// -------------------------------------------------------------------------
// Adam
// -------------------------------------------------------------------------

Adam::Adam(ParamList params, double lr, double beta1, double beta2, double eps)
    : lr(lr), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    slots_.reserve(params_.size());
    for (const auto& p : params_) {
        slots_.push_back({Tensor::zeros(p.tensor.shape()), Tensor::zeros(p.tensor.shape())});
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].tensor;
        auto vals = p.values_mut();
        auto m = slots_[i].m.values_mut();
        auto v = slots_[i].v.values_mut();
        const bool has_grad = p.has_grad();
        auto g = p.grad();
        for (std::size_t j = 0; j < vals.size(); ++j) {
            const double gj = has_grad ? g[j] : 0.0;
            if (!std::isfinite(gj)) {
                throw NumericError("non-finite gradient in parameter " + params_[i].name);
            }
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            vals[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
        p.zero_grad();
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

// -------------------------------------------------------------------------
// Trainer
// -------------------------------------------------------------------------

Trainer::Trainer(GatGanModel& model, TrainingConfig cfg)
    : model_(model),
      cfg_(cfg),
      enc_opt_(model.encoder_params(), cfg.lr_encoder, cfg.beta1, cfg.beta2, cfg.adam_eps),
      dec_opt_(model.decoder_params(), cfg.lr_decoder, cfg.beta1, cfg.beta2, cfg.adam_eps),
      disc_opt_(model.discriminator_params(), cfg.lr_discriminator, cfg.beta1, cfg.beta2,
                cfg.adam_eps),
      adv_opt_(model.encoder_params(), cfg.lr_encoder, cfg.beta1, cfg.beta2, cfg.adam_eps),
      rng_shuffle_(Rng(cfg.seed).stream(1)),
      rng_noise_(Rng(cfg.seed).stream(2)),
      rng_flip_(Rng(cfg.seed).stream(3)),
      rng_prior_(Rng(cfg.seed).stream(4)) {
    cfg_.validate();
}

LossRecord Trainer::step(const Tensor& batch) {
    const std::size_t k = batch.shape()[0];
    LossRecord rec;

    // Phase 1: reconstruction. Encoder and decoder descend the weighted
    // reconstruction objective; the discriminator is untouched.
    if (!cfg_.skip_reconstruction_phase) {
        Tape tape;
        Tensor noisy = inject_noise(batch, cfg_.noise_std, rng_noise_);
        Tensor z = model_.encode(noisy, true);
        Tensor xbar = model_.decode(z, true);
        Tensor recon = reconstruction_loss(batch, xbar);
        rec.recon = recon.item();
        tape.backward(mul_scalar(recon, cfg_.lambda_r));
        enc_opt_.step();
        dec_opt_.step();
        disc_opt_.zero_grad();
    } else {
        Tensor noisy = inject_noise(batch, cfg_.noise_std, rng_noise_);
        Tensor xbar = model_.decode(model_.encode(noisy, false), false);
        rec.recon = reconstruction_loss(batch, xbar).item();
    }

    // Phase 2a: discriminator on prior (real role) vs posterior (fake role),
    // with a per-minibatch chance of swapping the roles. The encoder runs
    // frozen and off-tape, so no gradient can reach it or the decoder.
    {
        Tensor noisy = inject_noise(batch, cfg_.noise_std, rng_noise_);
        Tensor posterior = model_.encode(noisy, false);
        Tensor prior = model_.sample_prior(k, rng_prior_);

        Tape tape;
        Tensor s_prior = model_.discriminate(prior, true);
        Tensor s_post = model_.discriminate(posterior, true);
        std::size_t correct = 0;
        for (double s : s_prior.values()) correct += s > 0.5;
        for (double s : s_post.values()) correct += s < 0.5;
        rec.disc_accuracy = static_cast<double>(correct) / static_cast<double>(2 * k);

        const bool flipped = flip_labels(cfg_.flip_prob, rng_flip_);
        Tensor loss_d =
            flipped ? discriminator_loss(s_post, s_prior) : discriminator_loss(s_prior, s_post);
        rec.disc = loss_d.item();
        tape.backward(loss_d);
        disc_opt_.step();
        enc_opt_.zero_grad();
        dec_opt_.zero_grad();
    }

    // Phase 2b: encoder descends the full generator objective — the
    // non-saturating score term plus the weighted reconstruction term —
    // through a frozen discriminator and decoder; only encoder
    // parameters step.
    {
        Tape tape;
        Tensor noisy = inject_noise(batch, cfg_.noise_std, rng_noise_);
        Tensor z = model_.encode(noisy, true);
        Tensor scores = model_.discriminate(z, false);
        Tensor recon = reconstruction_loss(batch, model_.decode(z, false));
        Tensor gen = generator_loss(scores, recon, cfg_.lambda_r);
        rec.gen = gen.item();
        tape.backward(gen);
        adv_opt_.step();
        disc_opt_.zero_grad();
        dec_opt_.zero_grad();
    }

    if (!std::isfinite(rec.recon) || !std::isfinite(rec.disc) || !std::isfinite(rec.gen)) {
        throw TrainingDiverged("training loss became non-finite", last_checkpoint_);
    }
    return rec;
}

std::vector<LossRecord> Trainer::run(const Tensor& windows, CheckpointFn checkpoint) {
    if (windows.rank() != 3) {
        throw DimensionError("training data must be [K,T,F], got " + shape_str(windows.shape()));
    }
    const std::size_t total = windows.shape()[0];
    const std::size_t tau = windows.shape()[1], feat = windows.shape()[2];
    if (total == 0) throw ContractError("training dataset is empty");

    std::vector<LossRecord> records;
    records.reserve(cfg_.epochs);
    double best_recon = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        rng_shuffle_.shuffle(order);

        LossRecord avg;
        avg.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t off = 0; off < total; off += cfg_.batch_size) {
            const std::size_t b = std::min(cfg_.batch_size, total - off);
            Tensor batch({b, tau, feat});
            auto dst = batch.values_mut();
            const auto src = windows.values();
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t row = order[off + i];
                std::copy(src.begin() + row * tau * feat, src.begin() + (row + 1) * tau * feat,
                          dst.begin() + i * tau * feat);
            }
            LossRecord rec;
            try {
                rec = step(batch);
            } catch (const NumericError& e) {
                throw TrainingDiverged(e.what(), last_checkpoint_);
            }
            avg.recon += rec.recon;
            avg.gen += rec.gen;
            avg.disc += rec.disc;
            avg.disc_accuracy += rec.disc_accuracy;
            ++batches;
        }
        avg.recon /= static_cast<double>(batches);
        avg.gen /= static_cast<double>(batches);
        avg.disc /= static_cast<double>(batches);
        avg.disc_accuracy /= static_cast<double>(batches);
        avg.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        records.push_back(avg);
        ++model_.epochs_trained;

        if (checkpoint) {
            const bool best = avg.recon < best_recon;
            if (best) best_recon = avg.recon;
            if (best || epoch % cfg_.checkpoint_every == 0 || epoch == cfg_.epochs) {
                last_checkpoint_ = checkpoint(model_, epoch, best);
            }
        }
    }
    return records;
}

std::vector<LossRecord> train_loop(GatGanModel& model, const Tensor& windows,
                                   const TrainingConfig& cfg, CheckpointFn checkpoint) {
    Trainer trainer(model, cfg);
    return trainer.run(windows, std::move(checkpoint));
}

std::string loss_log_csv(const std::vector<LossRecord>& records) {
    std::ostringstream os;
    os << "epoch,recon,gen,disc,disc_accuracy,seconds\n";
    os << std::setprecision(17);
    for (const auto& r : records) {
        os << r.epoch << ',' << r.recon << ',' << r.gen << ',' << r.disc << ','
           << r.disc_accuracy << ',' << r.seconds << '\n';
    }
    return os.str();
}

}  // namespace gatgan
