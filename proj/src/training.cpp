#include "tapelab/training.hpp"

#include <cmath>

#include "tapelab/loss.hpp"

namespace tapelab {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<VectorXd> zero_gradients(const std::vector<const nn::Network*>& nets) {
  std::vector<VectorXd> out;
  out.reserve(nets.size());
  for (const auto* n : nets) out.push_back(VectorXd::Zero(n->parameter_count()));
  return out;
}

/// Adds `weight * term` to the objective unless the weight is zero.
double weighted_term(double weight, const MatrixXd& pred, const MatrixXd& target, MatrixXd& grad,
                     const char* name) {
  if (weight == 0.0) {
    grad = MatrixXd::Zero(pred.rows(), pred.cols());
    return 0.0;
  }
  const double value = relative_l2(pred, target, &grad, name);
  grad *= weight;
  return value;
}

void fit(const std::vector<nn::Network*>& nets, const OptimizerConfig& config, int epochs,
         std::string_view phase, const std::function<Objective(int)>& objective,
         LossHistory* history, const ProgressFn& progress) {
  std::vector<Optimizer> optimizers;
  optimizers.reserve(nets.size());
  for (const auto* n : nets) optimizers.emplace_back(config, n->parameter_count());
  if (history) *history = {};

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Objective obj = objective(epoch);
    for (std::size_t i = 0; i < obj.loss.values.size(); ++i)
      if (!std::isfinite(obj.loss.values[i]))
        throw NumericError(std::string(phase) + ": non-finite loss term " + obj.loss.names[i] +
                           " at epoch " + std::to_string(epoch));
    if (!std::isfinite(obj.loss.total))
      throw NumericError(std::string(phase) + ": non-finite total loss at epoch " +
                         std::to_string(epoch));
    for (std::size_t i = 0; i < nets.size(); ++i)
      optimizers[i].step(nets[i]->parameters(), obj.gradients[i], epoch);
    if (history) {
      if (history->names.empty()) history->names = obj.loss.names;
      history->epochs.push_back(epoch);
      history->totals.push_back(obj.loss.total);
      history->terms.push_back(obj.loss.values);
    }
    if (progress) progress(phase, epoch, obj.loss);
  }
}

void check_data(const SampleSet& train, const ArchitectureConfig& arch, bool need_dic) {
  if (train.size() == 0) throw InvalidArgument("training set is empty");
  if (train.inputs.rows() != arch.input_length)
    throw InvalidArgument("profiles have " + std::to_string(train.inputs.rows()) +
                          " points but the architecture expects " +
                          std::to_string(arch.input_length));
  if (need_dic && train.dic.rows() != arch.horizon)
    throw InvalidArgument("DIC targets have " + std::to_string(train.dic.rows()) +
                          " samples but the architecture expects a horizon of " +
                          std::to_string(arch.horizon));
}

}  // namespace

Targets make_targets(const SampleSet& samples, ClassTarget target, Eigen::Index classes) {
  Targets t;
  t.inputs = samples.inputs;
  t.dic = samples.dic;
  if (target == ClassTarget::kOneHot) {
    t.classes = one_hot(samples.labels, static_cast<int>(classes));
  } else {
    t.classes.resize(1, samples.size());
    for (Eigen::Index j = 0; j < samples.size(); ++j) {
      const int label = samples.labels[static_cast<std::size_t>(j)];
      if (label < 1 || label > classes) throw InvalidData("label outside 1.." + std::to_string(classes));
      t.classes(0, j) = label;
    }
  }
  return t;
}

std::vector<nn::Network*> networks(RraeModel& m) {
  std::vector<nn::Network*> out{&m.encoder, &m.decoder, &m.classifier, &m.dic_head};
  if (m.bottleneck) out.push_back(&*m.bottleneck);
  return out;
}

std::vector<nn::Network*> networks(ExtendedModel& m) {
  return {&m.m1.encoder, &m.m1.decoder, &m.m1.classifier, &m.m1.dic_head,
          &m.m2.encoder, &m.m2.decoder};
}

std::vector<nn::Network*> networks(DicAutoencoder& m) { return {&m.encoder, &m.decoder}; }

std::vector<nn::Network*> networks(EncDecModel& m) { return {&m.net}; }

Objective rrae_objective(const RraeModel& m, const Targets& t, const LossWeights& w,
                         const LatentBasis<double>* fixed_basis) {
  std::vector<const nn::Network*> nets{&m.encoder, &m.decoder, &m.classifier, &m.dic_head};
  if (m.bottleneck) nets.push_back(&*m.bottleneck);
  Objective obj;
  obj.gradients = zero_gradients(nets);

  nn::Tape te, td, tc, tk, tb;
  const MatrixXd y = m.encoder.forward(t.inputs, &te);
  MatrixXd yr;
  LatentBasis<double> basis;
  if (m.bottleneck) {
    yr = m.bottleneck->forward(y, &tb);
  } else {
    basis = fixed_basis ? *fixed_basis : leading_modes(y, m.k_max);
    yr = basis.modes * basis.coefficients(y);
  }
  const MatrixXd xh = m.decoder.forward(yr, &td);
  const MatrixXd c = m.classifier.forward(yr, &tc);
  const MatrixXd d = m.dic_head.forward(yr, &tk);

  MatrixXd gx, gc, gd;
  const double lr = weighted_term(w.recon, xh, t.inputs, gx, "L_r");
  const double lc = weighted_term(w.classification, c, t.classes, gc, "L_c");
  const double ld = weighted_term(w.dic, d, t.dic, gd, "L_DIC");
  obj.loss = {{"L_r", "L_c", "L_DIC"},
              {lr, lc, ld},
              w.recon * lr + w.classification * lc + w.dic * ld};

  MatrixXd gyr = m.decoder.backward(gx, td, obj.gradients[1]);
  gyr += m.classifier.backward(gc, tc, obj.gradients[2]);
  gyr += m.dic_head.backward(gd, tk, obj.gradients[3]);
  const MatrixXd gy = m.bottleneck ? m.bottleneck->backward(gyr, tb, obj.gradients[4])
                                   : MatrixXd(basis.modes * (basis.modes.transpose() * gyr));
  m.encoder.backward(gy, te, obj.gradients[0], false);
  return obj;
}

Objective dic_autoencoder_objective(const DicAutoencoder& m, const MatrixXd& curves,
                                    const LatentBasis<double>* fixed_basis) {
  Objective obj;
  obj.gradients = zero_gradients({&m.encoder, &m.decoder});
  nn::Tape te, td;
  const MatrixXd y = m.encoder.forward(curves, &te);
  const LatentBasis<double> basis = fixed_basis ? *fixed_basis : leading_modes(y, m.r_max);
  const MatrixXd z = basis.modes * basis.coefficients(y);
  const MatrixXd ds = m.decoder.forward(z, &td);
  MatrixXd g;
  const double l = relative_l2(ds, curves, &g, "L_DIC*");
  obj.loss = {{"L_DIC*"}, {l}, l};
  const MatrixXd gz = m.decoder.backward(g, td, obj.gradients[1]);
  m.encoder.backward(basis.modes * (basis.modes.transpose() * gz), te, obj.gradients[0], false);
  return obj;
}

Objective extended_objective(const ExtendedModel& m, const Targets& t, const ExtendedWeights& w,
                             const LatentBasis<double>* fixed_basis) {
  if (m.m2.basis.empty()) throw InvalidArgument("extended objective: M2 basis V is not fixed");
  const RraeModel& m1 = m.m1;
  const DicAutoencoder& m2 = m.m2;
  Objective obj;
  obj.gradients = zero_gradients(
      {&m1.encoder, &m1.decoder, &m1.classifier, &m1.dic_head, &m2.encoder, &m2.decoder});

  nn::Tape te, td, tc, tb, te2, tstar, tpred;
  const MatrixXd y = m1.encoder.forward(t.inputs, &te);
  const LatentBasis<double> basis = fixed_basis ? *fixed_basis : leading_modes(y, m1.k_max);
  const MatrixXd yr = basis.modes * basis.coefficients(y);
  const MatrixXd xh = m1.decoder.forward(yr, &td);
  const MatrixXd c = m1.classifier.forward(yr, &tc);
  const MatrixXd beta = m1.dic_head.forward(yr, &tb);

  const MatrixXd& v = m2.basis.modes;
  const MatrixXd y2 = m2.encoder.forward(t.dic, &te2);
  const MatrixXd z2 = v * (v.transpose() * y2);
  const MatrixXd dstar = m2.decoder.forward(z2, &tstar);
  const MatrixXd dpred = m2.decoder.forward(v * beta, &tpred);

  MatrixXd g1, g2, g3, g4;
  const double l1 = weighted_term(w.classification, c, t.classes, g1, "L1_class");
  const double l2 = weighted_term(w.recon, xh, t.inputs, g2, "L2_recon");
  const double l3 = weighted_term(w.dic_star, dstar, t.dic, g3, "L3_dic_star");
  const double l4 = weighted_term(w.dic_pred, dpred, t.dic, g4, "L4_dic_pred");
  obj.loss = {{"L1_class", "L2_recon", "L3_dic_star", "L4_dic_pred"},
              {l1, l2, l3, l4},
              w.classification * l1 + w.recon * l2 + w.dic_star * l3 + w.dic_pred * l4};

  const MatrixXd gz2 = m2.decoder.backward(g3, tstar, obj.gradients[5]);
  const MatrixXd gvb = m2.decoder.backward(g4, tpred, obj.gradients[5]);
  m2.encoder.backward(v * (v.transpose() * gz2), te2, obj.gradients[4], false);

  MatrixXd gyr = m1.decoder.backward(g2, td, obj.gradients[1]);
  gyr += m1.classifier.backward(g1, tc, obj.gradients[2]);
  gyr += m1.dic_head.backward(v.transpose() * gvb, tb, obj.gradients[3]);
  m1.encoder.backward(basis.modes * (basis.modes.transpose() * gyr), te, obj.gradients[0], false);
  return obj;
}

Objective encdec_objective(const EncDecModel& m, const Targets& t, bool training,
                           std::uint64_t dropout_seed) {
  Objective obj;
  obj.gradients = zero_gradients({&m.net});
  nn::Tape tape;
  const MatrixXd p = m.net.forward(t.inputs, &tape, nn::RunMode{training, dropout_seed});
  MatrixXd g;
  const double l = relative_l2(p, t.dic, &g, "L_DIC");
  obj.loss = {{"L_DIC"}, {l}, l};
  m.net.backward(g, tape, obj.gradients[0], false);
  return obj;
}

namespace {

RraeModel train_autoencoder(const SampleSet& train, const TrainConfig& config, bool classical,
                            LossHistory* history, const ProgressFn& progress) {
  check_data(train, config.net, config.weights.dic != 0.0);
  if (!classical && train.size() < config.k_max)
    throw InvalidArgument("k_max " + std::to_string(config.k_max) + " exceeds the batch size " +
                          std::to_string(train.size()));
  RraeModel m = make_rrae(config.net, config.k_max, config.class_target, classical, config.seed);
  const Targets t = make_targets(train, config.class_target, config.net.classes);
  fit(networks(m), config.optimizer, config.epochs, classical ? "ae" : "rrae",
      [&](int) { return rrae_objective(m, t, config.weights); }, history, progress);
  if (!classical) m.basis = leading_modes(m.encoder.forward(t.inputs), m.k_max);
  return m;
}

}  // namespace

RraeModel train_rrae(const SampleSet& train, const TrainConfig& config, LossHistory* history,
                     const ProgressFn& progress) {
  return train_autoencoder(train, config, false, history, progress);
}

RraeModel train_classical_ae(const SampleSet& train, const TrainConfig& config,
                             LossHistory* history, const ProgressFn& progress) {
  return train_autoencoder(train, config, true, history, progress);
}

DicAutoencoder train_dic_autoencoder(const MatrixXd& curves, const TrainConfig& config,
                                     LossHistory* history, const ProgressFn& progress) {
  if (curves.rows() != config.net.horizon)
    throw InvalidArgument("DIC curves have " + std::to_string(curves.rows()) +
                          " samples, expected " + std::to_string(config.net.horizon));
  if (curves.cols() < config.r_max)
    throw InvalidArgument("r_max exceeds the number of curves");
  DicAutoencoder m = make_dic_autoencoder(config.net, config.r_max, config.seed);
  const int epochs = config.m2_epochs > 0 ? config.m2_epochs : config.epochs;
  fit(networks(m), config.optimizer, epochs, "m2",
      [&](int) { return dic_autoencoder_objective(m, curves); }, history, progress);
  m.basis = leading_modes(m.encoder.forward(curves), m.r_max);
  return m;
}

ExtendedModel train_extended(const SampleSet& train, const TrainConfig& config,
                             LossHistory* m2_history, LossHistory* history,
                             const ProgressFn& progress, DicAutoencoder* m2_pretrained) {
  check_data(train, config.net, true);
  if (train.size() < config.k_max)
    throw InvalidArgument("k_max exceeds the batch size");
  ExtendedModel m = make_extended(config.net, config.k_max, config.r_max, config.class_target,
                                  config.seed);
  m.m2 = train_dic_autoencoder(train.dic, config, m2_history, progress);
  if (m2_pretrained) *m2_pretrained = m.m2;
  const Targets t = make_targets(train, config.class_target, config.net.classes);
  fit(networks(m), config.optimizer, config.epochs, "extended",
      [&](int) { return extended_objective(m, t, config.extended_weights); }, history, progress);
  m.m1.basis = leading_modes(m.m1.encoder.forward(t.inputs), m.m1.k_max);
  return m;
}

EncDecModel train_supervised_encdec(const SampleSet& train, const TrainConfig& config,
                                    LossHistory* history, const ProgressFn& progress) {
  check_data(train, config.net, true);
  EncDecModel m = make_encdec(config.net, config.seed);
  Targets t;
  t.inputs = train.inputs;
  t.dic = train.dic;
  const std::uint64_t base = config.seed ^ 0x5eedd20b0a7e1234ULL;
  fit(networks(m), config.optimizer, config.epochs, "encdec",
      [&](int epoch) {
        return encdec_objective(m, t, true, base + static_cast<std::uint64_t>(epoch));
      },
      history, progress);
  return m;
}

TrainResult train(const SampleSet& train_set, const TrainConfig& config,
                  const ProgressFn& progress) {
  TrainResult r;
  switch (config.arch) {
    case Architecture::kRrae:
      r.model = train_rrae(train_set, config, &r.history, progress);
      break;
    case Architecture::kClassicalAe:
      r.model = train_classical_ae(train_set, config, &r.history, progress);
      break;
    case Architecture::kExtended:
      r.m2_pretrained.emplace();
      r.model = train_extended(train_set, config, &r.m2_history, &r.history, progress,
                               &*r.m2_pretrained);
      break;
    case Architecture::kEncDec:
      r.model = train_supervised_encdec(train_set, config, &r.history, progress);
      break;
  }
  r.final_pass = predict(r.model, train_set.inputs);
  return r;
}

}  // namespace tapelab
