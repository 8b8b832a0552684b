#include "dpcc/training/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "dpcc/autodiff/ops.hpp"
#include "dpcc/error.hpp"

namespace dpcc {
namespace {

using ad::Tensor;

constexpr std::uint64_t kShuffleStream = 0x5bd1e9955bd1e995ull;

Tensor position_symbol_tensor(const PointCloud& bottleneck, int bits) {
  const auto sym = position_symbols(bottleneck, bits);
  return Tensor::from({bottleneck.size(), 3}, std::vector<double>(sym.begin(), sym.end()));
}

bool all_finite(const Tensor& t) {
  for (double x : t.data())
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ArgumentError("train.epochs must be positive");
  if (!(learning_rate > 0.0)) throw ArgumentError("train.learning_rate must be positive");
  if (!(lr_decay > 0.0)) throw ArgumentError("train.lr_decay must be positive");
  if (repeats == 0) throw ArgumentError("train.repeats must be positive");
}

ForwardPass forward_pass(const CodecModel& model, const PointCloud& block, const LossConfig& cfg,
                         Rng& noise) {
  if (block.empty()) throw ArgumentError("forward_pass: empty block");
  const CodecConfig& codec = model.config();
  ForwardPass f;
  f.encoded = model.encoder().encode(block);
  const EncoderOutput& enc = f.encoded;
  // Nearest-neighbor searches downstream cannot cope with NaN coordinates.
  if (!all_finite(enc.features)) throw NanLossError("non-finite bottleneck features");
  const double n0 = static_cast<double>(block.size());

  const FactorizedEntropyModel& prior = model.feature_prior();
  const NoisyRate rate = rate_proxy(
      enc.features, [&](const Tensor& y) { return prior.likelihood(y); }, noise);
  f.terms.rate = ad::scale(rate.bits, 1.0 / n0);

  f.decoded = model.decoder().decode(quantized_positions(enc.bottleneck, codec.position_bits),
                                     rate.noisy);
  const DecoderOutput& dec = f.decoded;
  const std::size_t stages = codec.stages();
  for (std::size_t s = 0; s <= stages; ++s) {
    if (!all_finite(dec.cloud(s))) throw NanLossError("non-finite decoded points");
  }

  std::vector<Tensor> predicted;
  std::vector<std::vector<Vec3>> target;
  std::vector<DensityStage> density;
  std::vector<std::size_t> counts;
  std::vector<Tensor> factors;
  for (std::size_t s = 0; s < stages; ++s) {
    const EncoderStage& es = enc.stages[s];
    predicted.push_back(dec.cloud(s));
    target.push_back(es.input.positions);
    density.push_back({es.input.positions, &es.map, &dec.stages[s], dec.cloud(s + 1)});
    counts.push_back(es.input.size());
    factors.push_back(dec.stages[s].factor.continuous);
  }
  f.terms.chamfer = chamfer_loss_multistage(predicted, target);
  f.terms.density = density_loss(density, cfg.gamma);
  f.terms.cardinality = cardinality_loss(counts, factors);
  if (codec.normals) f.terms.normal = normal_loss(dec.points, dec.normals, block);
  f.total = total_loss(f.terms, cfg);

  const Tensor symbols = position_symbol_tensor(enc.bottleneck, codec.position_bits);
  f.position_rate = ad::scale(rate_bits(model.position_prior().likelihood(symbols)), 1.0 / n0);
  f.objective = ad::add(f.total, f.position_rate);
  return f;
}

StepLosses step_losses(const ForwardPass& p) {
  StepLosses s;
  s.chamfer = p.terms.chamfer.item();
  s.density = p.terms.density.item();
  s.cardinality = p.terms.cardinality.item();
  s.rate = p.terms.rate.item();
  if (p.terms.normal.defined()) s.normal = p.terms.normal.item();
  s.total = p.total.item();
  return s;
}

TrainResult train(CodecModel& model, const std::vector<PointCloud>& blocks,
                  const TrainConfig& tc, const LossConfig& lc, const StepCallback& on_step) {
  tc.validate();
  lc.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (!blocks[i].empty()) usable.push_back(i);
  if (usable.empty()) throw ArgumentError("train: no non-empty blocks");

  Rng noise(tc.seed);
  Rng shuffle(tc.seed ^ kShuffleStream);
  Adam adam;
  ad::ParameterStore& store = model.store();
  TrainResult result;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = scheduled_learning_rate(tc.learning_rate, epoch, tc.lr_decay, tc.decay_every);
    std::vector<std::size_t> order;
    for (std::size_t r = 0; r < tc.repeats; ++r) order.insert(order.end(), usable.begin(), usable.end());
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    EpochLog log;
    log.epoch = epoch;
    log.learning_rate = lr;
    for (std::size_t b : order) {
      std::vector<std::vector<double>> snapshot;
      for (const ad::Parameter& p : store.entries()) {
        snapshot.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
      }
      store.zero_grad();
      StepLosses s;
      bool finite = true;
      try {
        const ForwardPass pass = forward_pass(model, blocks[b], lc, noise);
        s = step_losses(pass);
        finite = std::isfinite(s.total) && std::isfinite(pass.position_rate.item());
        if (finite) ad::backward(pass.objective);
      } catch (const NanLossError&) {
        finite = false;
      }
      for (const ad::Parameter& p : store.entries()) {
        if (!finite) break;
        if (!p.trainable || !p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad()) finite = finite && std::isfinite(g);
      }
      if (!finite) {
        for (std::size_t i = 0; i < snapshot.size(); ++i) {
          auto dst = store.entries()[i].tensor.mutable_data();
          std::copy(snapshot[i].begin(), snapshot[i].end(), dst.begin());
        }
        store.zero_grad();
        throw NanLossError("training loss became non-finite at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(result.steps) +
                           "; parameters restored to the last finite step");
      }
      adam.step(store, lr);
      ++result.steps;
      if (on_step) on_step(result.steps, s);
      log.mean.chamfer += s.chamfer;
      log.mean.density += s.density;
      log.mean.cardinality += s.cardinality;
      log.mean.rate += s.rate;
      log.mean.normal += s.normal;
      log.mean.total += s.total;
    }
    const double k = static_cast<double>(order.size());
    log.mean.chamfer /= k;
    log.mean.density /= k;
    log.mean.cardinality /= k;
    log.mean.rate /= k;
    log.mean.normal /= k;
    log.mean.total /= k;
    result.epochs.push_back(log);
  }
  store.zero_grad();
  model.freeze(blocks);
  return result;
}

std::string loss_csv(const std::vector<EpochLog>& epochs) {
  std::ostringstream out;
  out << "epoch,D_cha,D_den,D_card,R,total\n" << std::setprecision(10);
  for (const EpochLog& e : epochs) {
    out << e.epoch << ',' << e.mean.chamfer << ',' << e.mean.density << ',' << e.mean.cardinality
        << ',' << e.mean.rate << ',' << e.mean.total << '\n';
  }
  return out.str();
}

}  // namespace dpcc
