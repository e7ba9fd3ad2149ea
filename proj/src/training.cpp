#include "srgan/training.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "srgan/metrics.hpp"

namespace srgan {

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::DNN: return "dnn";
        case Method::SRGAN: return "srgan";
        case Method::DGGAN: return "dggan";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    if (name == "dnn") return Method::DNN;
    if (name == "srgan") return Method::SRGAN;
    if (name == "dggan") return Method::DGGAN;
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (steps <= 0) throw std::invalid_argument("steps must be positive");
    if (batch_labeled == 0 || batch_unlabeled == 0 || batch_fake == 0) {
        throw std::invalid_argument("batch sizes must be positive");
    }
    if (!(learning_rate_d > 0.0) || !(learning_rate_g > 0.0)) {
        throw std::invalid_argument("learning rates must be positive");
    }
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (noise_dim == 0) throw std::invalid_argument("noise_dim must be positive");
    if (eval_interval <= 0) throw std::invalid_argument("eval_interval must be positive");
    if (method == Method::SRGAN && batch_unlabeled != batch_fake) {
        throw std::invalid_argument("srgan needs batch_unlabeled == batch_fake for interpolation");
    }
}

bool HistoryEntry::operator==(const HistoryEntry& o) const {
    // Bitwise comparison so that NaN entries still compare equal to themselves.
    const auto same = [](double a, double b) {
        return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
    };
    return step == o.step && losses.step == o.losses.step && same(test_mae, o.test_mae) &&
           same(losses.labeled_loss, o.losses.labeled_loss) &&
           same(losses.unlabeled_loss, o.losses.unlabeled_loss) &&
           same(losses.fake_loss, o.losses.fake_loss) &&
           same(losses.gradient_penalty, o.losses.gradient_penalty) &&
           same(losses.generator_loss, o.losses.generator_loss);
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "step,labeled,unlabeled,fake,penalty,generator,test_mae\n";
    char buf[64];
    for (const auto& h : history) {
        std::ostringstream row;
        write_loss_csv_row(row, h.losses);
        std::string line = row.str();
        line.pop_back();
        std::snprintf(buf, sizeof buf, ",%.17g\n", h.test_mae);
        out << line << buf;
    }
    if (!out) throw std::runtime_error("error writing " + path.string());
}

MinibatchSampler::MinibatchSampler(std::size_t pool, std::size_t batch) : pool_(pool), batch_(batch) {
    if (pool == 0) throw std::invalid_argument("cannot sample minibatches from an empty set");
    order_.resize(pool);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = pool;  // forces a shuffle on first use
}

std::vector<std::size_t> MinibatchSampler::next(Rng& rng) {
    std::vector<std::size_t> idx(batch_);
    if (pool_ < batch_) {
        std::uniform_int_distribution<std::size_t> pick(0, pool_ - 1);
        for (auto& i : idx) i = pick(rng);
        return idx;
    }
    for (auto& i : idx) {
        if (cursor_ == pool_) {
            std::shuffle(order_.begin(), order_.end(), rng);
            cursor_ = 0;
        }
        i = order_[cursor_++];
    }
    return idx;
}

namespace {

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> idx) {
    Tensor out(idx.size(), src.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto row = src.row(idx[r]);
        std::copy(row.begin(), row.end(), out.values().begin() + r * src.cols());
    }
    return out;
}

const TrainConfig& validated(const TrainConfig& c) {
    c.validate();
    return c;
}

Rng stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return Rng(seq);
}

std::vector<Tensor> parameter_grads(const BoundMlp& bound) {
    std::vector<Tensor> grads;
    grads.reserve(2 * bound.weights.size());
    for (std::size_t l = 0; l < bound.weights.size(); ++l) {
        grads.push_back(bound.weights[l].grad());
        grads.push_back(bound.biases[l].grad());
    }
    return grads;
}

}  // namespace

struct Trainer::Objective {
    BoundMlp d;
    Var total;
    LossReport report;
};

Trainer::Trainer(TrainConfig config, const DatasetBundle& bundle)
    : config_(validated(config)),
      bundle_(&bundle),
      adam_d_(AdamConfig{.learning_rate = config.learning_rate_d}),
      adam_g_(AdamConfig{.learning_rate = config.learning_rate_g}),
      sample_rng_(stream(config.seed, 2)),
      labeled_sampler_(bundle.labeled.size(), config.batch_labeled) {
    labeled_x_ = observations_matrix(bundle.labeled);
    labeled_y_ = labels_column(bundle.labeled);
    test_x_ = observations_matrix(bundle.test);
    for (const auto& ex : bundle.test) {
        if (!ex.label) throw std::invalid_argument("test example without label");
        test_y_.push_back(*ex.label);
    }

    Rng init = stream(config.seed, 1);
    const std::size_t head = config.method == Method::DGGAN ? 2 : 1;
    d_.net = init_parameters(discriminator_spec(head), init);
    if (config.method != Method::DNN) {
        if (bundle.unlabeled.empty()) {
            throw std::invalid_argument(std::string(to_string(config.method)) + " needs unlabeled data");
        }
        unlabeled_x_ = observations_matrix(bundle.unlabeled);
        unlabeled_sampler_.emplace(bundle.unlabeled.size(), config.batch_unlabeled);
        g_ = Generator{init_parameters(generator_spec(config.noise_dim), init)};
    }
}

StepBatches Trainer::sample_batches() {
    StepBatches b;
    const auto li = labeled_sampler_.next(sample_rng_);
    b.labeled = gather_rows(labeled_x_, li);
    b.labels = gather_rows(labeled_y_, li);
    if (config_.method == Method::DNN) return b;

    const auto ui = unlabeled_sampler_->next(sample_rng_);
    b.unlabeled = gather_rows(unlabeled_x_, ui);
    b.noise = sample_noise(sample_rng_, config_.batch_fake, config_.noise_dim);
    if (config_.method == Method::SRGAN) {
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        b.alpha.resize(config_.batch_unlabeled);
        for (double& a : b.alpha) a = uniform(sample_rng_);
    }
    return b;
}

Tensor Trainer::fake_batch(const Tensor& noise) const { return predict(g_->net, noise); }

Trainer::Objective Trainer::build_discriminator_objective(Tape& tape, const StepBatches& b,
                                                          bool trainable) const {
    Objective o;
    o.d = bind(tape, d_.net, trainable);
    LossReport& r = o.report;
    r.step = step_;

    switch (config_.method) {
        case Method::DNN: {
            const auto out = discriminator_forward(o.d, tape.constant(b.labeled));
            o.total = labeled_loss(out.prediction, b.labels);
            r.labeled_loss = o.total.value().item();
            break;
        }
        case Method::SRGAN: {
            const Tensor fake = fake_batch(b.noise);
            const auto lab = discriminator_forward(o.d, tape.constant(b.labeled));
            const auto unl = discriminator_forward(o.d, tape.constant(b.unlabeled));
            const auto fk = discriminator_forward(o.d, tape.constant(fake));
            const Var mean_l = mean_rows(lab.features);
            const Var mean_u = mean_rows(unl.features);
            const Var mean_f = mean_rows(fk.features);
            const Var l_lab = labeled_loss(lab.prediction, b.labels);
            const Var l_unl = unlabeled_loss(feature_distance(mean_l, mean_u));
            const Var l_fake = fake_loss(feature_distance(mean_f, mean_u), config_.variant);
            const Var l_gp =
                gradient_penalty_at(o.d, interpolate_rows(b.unlabeled, fake, b.alpha), config_.lambda);
            o.total = add(add(l_lab, l_unl), add(l_fake, l_gp));
            r.labeled_loss = l_lab.value().item();
            r.unlabeled_loss = l_unl.value().item();
            r.fake_loss = l_fake.value().item();
            r.gradient_penalty = l_gp.value().item();
            break;
        }
        case Method::DGGAN: {
            const Tensor fake = fake_batch(b.noise);
            const std::array<Tensor, 3> parts{b.labeled, b.unlabeled, fake};
            const Tensor batch = stack_rows(parts);
            std::vector<RowRole> roles;
            roles.insert(roles.end(), b.labeled.rows(), RowRole::Labeled);
            roles.insert(roles.end(), b.unlabeled.rows(), RowRole::Unlabeled);
            roles.insert(roles.end(), fake.rows(), RowRole::Fake);
            Tensor labels(batch.rows(), 1);
            for (std::size_t i = 0; i < b.labels.rows(); ++i) labels[i] = b.labels[i];

            const auto out = discriminator_forward(o.d, tape.constant(batch));
            const auto losses = dggan_losses(out.prediction, *out.realness_logit, labels, roles);
            o.total = losses.discriminator;
            double mse = 0.0;
            for (std::size_t i = 0; i < b.labels.rows(); ++i) {
                const double e = out.prediction.value()[i] - b.labels[i];
                mse += e * e;
            }
            r.labeled_loss = mse / static_cast<double>(b.labels.rows());
            r.fake_loss = o.total.value().item() - r.labeled_loss;
            break;
        }
    }
    return o;
}

LossReport Trainer::discriminator_objective(const StepBatches& batches) const {
    Tape tape;
    return build_discriminator_objective(tape, batches, false).report;
}

double Trainer::generator_objective(const StepBatches& b) const {
    if (!g_) return 0.0;
    Tape tape;
    const BoundMlp g = bind(tape, g_->net, false);
    const BoundMlp d = bind(tape, d_.net, false);
    const Var fake = generator_forward(g, tape.constant(b.noise));
    const auto fk = discriminator_forward(d, fake);
    if (config_.method == Method::SRGAN) {
        const auto unl = discriminator_forward(d, tape.constant(b.unlabeled));
        return generator_loss(feature_distance(mean_rows(fk.features), mean_rows(unl.features)),
                              config_.variant)
            .value()
            .item();
    }
    const std::vector<RowRole> roles(b.noise.rows(), RowRole::Fake);
    return dggan_losses(fk.prediction, *fk.realness_logit, Tensor(b.noise.rows(), 1), roles)
        .generator.value()
        .item();
}

LossReport Trainer::discriminator_step(const StepBatches& batches) {
    Tape tape;
    Objective o = build_discriminator_objective(tape, batches, true);
    if (!std::isfinite(o.total.value().item())) {
        throw TrainingAborted("non-finite discriminator loss at step " + std::to_string(step_), o.report);
    }
    tape.backward(o.total);
    adam_d_.step(d_.net, parameter_grads(o.d));

    counters_.discriminator_updates++;
    counters_.labeled_rows += batches.labeled.rows();
    counters_.unlabeled_rows += batches.unlabeled.rows();
    counters_.fake_rows += batches.noise.rows();
    return o.report;
}

double Trainer::generator_step(const StepBatches& b) {
    if (!g_) throw std::logic_error("generator_step: method has no generator");
    Tape tape;
    const BoundMlp g = bind(tape, g_->net, true);
    const BoundMlp d = bind(tape, d_.net, false);
    const Var fake = generator_forward(g, tape.constant(b.noise));
    const auto fk = discriminator_forward(d, fake);
    Var loss;
    if (config_.method == Method::SRGAN) {
        const auto unl = discriminator_forward(d, tape.constant(b.unlabeled));
        loss = generator_loss(feature_distance(mean_rows(fk.features), mean_rows(unl.features)),
                              config_.variant);
    } else {
        const std::vector<RowRole> roles(b.noise.rows(), RowRole::Fake);
        loss = dggan_losses(fk.prediction, *fk.realness_logit, Tensor(b.noise.rows(), 1), roles).generator;
    }
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
        LossReport r;
        r.step = step_;
        r.generator_loss = value;
        throw TrainingAborted("non-finite generator loss at step " + std::to_string(step_), r);
    }
    tape.backward(loss);
    adam_g_.step(g_->net, parameter_grads(g));
    counters_.generator_updates++;
    counters_.fake_rows += b.noise.rows();
    return value;
}

LossReport Trainer::step() {
    ++step_;
    const StepBatches b = sample_batches();
    LossReport r = discriminator_step(b);
    if (g_) r.generator_loss = generator_step(b);
    r.step = step_;
    if (!r.all_finite()) throw TrainingAborted("non-finite loss at step " + std::to_string(step_), r);
    return r;
}

double Trainer::test_mae() const {
    if (bundle_->test.empty()) return std::numeric_limits<double>::quiet_NaN();
    const Tensor out = predict(d_.net, test_x_);
    PredictionSet p;
    p.actual = test_y_;
    p.predicted.resize(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) p.predicted[i] = out(i, 0);
    return mae(p);
}

TrainHistory Trainer::run() {
    TrainHistory history;
    while (step_ < config_.steps) {
        const LossReport r = step();
        if (step_ % config_.eval_interval == 0 || step_ == config_.steps) {
            history.push_back({step_, r, test_mae()});
        }
    }
    return history;
}

TrainResult train(const TrainConfig& config, const DatasetBundle& bundle) {
    Trainer trainer(config, bundle);
    TrainResult result;
    result.history = trainer.run();
    result.discriminator = trainer.discriminator();
    result.generator = trainer.generator();
    result.counters = trainer.counters();
    result.test_mae = trainer.test_mae();
    return result;
}

double evaluate(const Discriminator& model, std::span<const Example> test_set) {
    if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
    const Tensor out = predict(model.net, observations_matrix(test_set));
    PredictionSet p;
    p.predicted.reserve(test_set.size());
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        if (!test_set[i].label) throw std::invalid_argument("evaluate: test example without label");
        p.predicted.push_back(out(i, 0));
        p.actual.push_back(*test_set[i].label);
    }
    return mae(p);
}

}  // namespace srgan
