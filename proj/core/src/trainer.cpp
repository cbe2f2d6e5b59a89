#include "msmo/trainer.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "msmo/evaluate.hpp"
#include "msmo/heads.hpp"

namespace msmo {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Schedule s) { return s == Schedule::Sequential ? "sequential" : "interleaved"; }

Schedule parse_schedule(std::string_view s) {
  if (s == "sequential") return Schedule::Sequential;
  if (s == "interleaved") return Schedule::Interleaved;
  throw std::invalid_argument("unknown schedule '" + std::string(s) + "'");
}

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::ZeroShot: return "zero_shot";
    case TrainMode::Msmo: return "msmo";
    case TrainMode::NoDiscriminator: return "ablation:no_discriminator";
    case TrainMode::NoConsistency: return "ablation:no_consistency";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view s) {
  for (auto m : {TrainMode::ZeroShot, TrainMode::Msmo, TrainMode::NoDiscriminator, TrainMode::NoConsistency})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown training mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(clip > 0.0)) throw std::invalid_argument("clip bound c must be > 0");
  if (critic_iters < 1) throw std::invalid_argument("critic iterations must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  if (step2_steps < 1) throw std::invalid_argument("step-2 budget must be >= 1");
  if (selection_window > step2_steps) throw std::invalid_argument("selection window exceeds step-2 budget");
  if (eval_interval < 1) throw std::invalid_argument("evaluation interval must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
}

TrainingData make_training_data(const CorpusBundle& bundle, const std::vector<std::string>& targets,
                                bool source_only) {
  TrainingData d;
  std::set<std::string> seen_source;
  for (const auto& ex : bundle.split(SplitName::Train)) {
    if (std::find(targets.begin(), targets.end(), ex.target_lang) == targets.end()) continue;
    d.examples.push_back(&ex);
    const auto& s = ex.view(Variant::S);
    if (seen_source.insert(s.key()).second) d.source_side.push_back(&s);
    d.source_side.push_back(&ex.view(Variant::ST));
    d.target_side.push_back(&ex.view(Variant::T));
    d.target_side.push_back(&ex.view(Variant::TS));
  }
  if (source_only) {
    // One group per distinct source sentence.
    std::set<std::string> seen;
    std::vector<const ParallelExample*> unique;
    for (const auto* ex : d.examples)
      if (seen.insert(ex->view(Variant::S).key()).second) unique.push_back(ex);
    d.examples = std::move(unique);
    d.variants = {Variant::S};
  } else {
    d.variants = {Variant::S, Variant::T, Variant::ST, Variant::TS};
  }
  d.dev = bundle.sentences(SplitName::Dev, Variant::S);
  return d;
}

std::string log_line(const LogRecord& r) {
  ordered_json j;
  j["step"] = r.step;
  j["stage"] = r.stage;
  j["loss_ce"] = r.loss_ce;
  j["loss_cons"] = r.loss_cons;
  j["loss_total"] = r.loss_total;
  j["j_q"] = r.j_q ? ordered_json(*r.j_q) : ordered_json(nullptr);
  if (r.dev_f1) j["dev_f1"] = *r.dev_f1;
  return j.dump();
}

LogRecord parse_log_line(std::string_view line) {
  auto j = ordered_json::parse(line);
  LogRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.stage = j.at("stage").get<std::string>();
  r.loss_ce = j.at("loss_ce").get<double>();
  r.loss_cons = j.at("loss_cons").get<double>();
  r.loss_total = j.at("loss_total").get<double>();
  if (j.contains("j_q") && !j["j_q"].is_null()) r.j_q = j["j_q"].get<double>();
  if (j.contains("dev_f1")) r.dev_f1 = j["dev_f1"].get<double>();
  return r;
}

const Checkpoint& select_checkpoint(std::span<const Checkpoint> checkpoints, std::size_t window) {
  if (checkpoints.empty()) throw std::invalid_argument("select_checkpoint: no checkpoints");
  std::size_t last = 0;
  for (const auto& c : checkpoints) last = std::max(last, c.step);
  const std::size_t from = last > window ? last - window : 0;
  const Checkpoint* best = nullptr;
  for (const auto& c : checkpoints) {
    if (c.step < from) continue;
    if (!best || c.dev_f1 > best->dev_f1 || (c.dev_f1 == best->dev_f1 && c.step > best->step)) best = &c;
  }
  return *best;
}

Trainer::Trainer(Model& model, TrainingData data, TrainConfig cfg, TrainMode mode, std::uint64_t seed)
    : model_(model),
      data_(std::move(data)),
      cfg_(std::move(cfg)),
      mode_(mode),
      step1_rng_(make_rng(seed, 11)),
      step2_rng_(make_rng(seed, 12)),
      dropout1_rng_(make_rng(seed, 13)),
      dropout2_rng_(make_rng(seed, 14)),
      critic_opt_(model.discriminator_params(), AdamConfig{cfg_.learning_rate}),
      adversarial_opt_(model.encoder_params(), AdamConfig{cfg_.learning_rate}),
      task_opt_(concat(model.encoder_params(), model.classifier_params()), AdamConfig{cfg_.learning_rate}) {
  cfg_.validate();
  if (data_.examples.empty()) throw std::invalid_argument("trainer: no training examples");
  if (uses_step1() && (data_.source_side.empty() || data_.target_side.empty()))
    throw std::invalid_argument("trainer: adversarial alignment needs both source-side and target-side data");
}

double Trainer::effective_beta() const {
  return (mode_ == TrainMode::Msmo || mode_ == TrainMode::NoDiscriminator) ? cfg_.beta : 0.0;
}

std::vector<const TaggedSentence*> Trainer::sample(const std::vector<const TaggedSentence*>& pool, std::size_t n,
                                                   Rng& rng) {
  std::vector<const TaggedSentence*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[uniform_index(rng, pool.size())]);
  return out;
}

std::vector<const ParallelExample*> Trainer::next_groups(std::size_t n) {
  std::vector<const ParallelExample*> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (cursor_ == order_.size()) {
      order_.resize(data_.examples.size());
      for (std::size_t k = 0; k < order_.size(); ++k) order_[k] = k;
      shuffle(order_, step2_rng_);
      cursor_ = 0;
    }
    out.push_back(data_.examples[order_[cursor_++]]);
  }
  return out;
}

double Trainer::critic_update() {
  const std::size_t half = cfg_.batch_size / 2;
  std::vector<ad::Var> src, tgt;
  for (const auto* s : sample(data_.source_side, half, step1_rng_))
    src.push_back(model_.discriminator().score(ad::detach(model_.hidden(s->tokens)), &dropout1_rng_));
  for (const auto* s : sample(data_.target_side, half, step1_rng_))
    tgt.push_back(model_.discriminator().score(ad::detach(model_.hidden(s->tokens)), &dropout1_rng_));
  ad::Var j_q = wasserstein_objective(src, tgt);
  critic_opt_.zero_grad();
  ad::backward(ad::scale(j_q, -1.0));
  critic_opt_.step();
  model_.discriminator().clip(cfg_.clip);
  return j_q.value().item();
}

double Trainer::encoder_adversarial_update() {
  const std::size_t half = cfg_.batch_size / 2;
  const ad::GradReversalConfig grl{cfg_.lambda};
  std::vector<ad::Var> src, tgt;
  for (const auto* s : sample(data_.source_side, half, step1_rng_))
    src.push_back(model_.discriminator().score(ad::grad_reverse(model_.hidden(s->tokens), grl), &dropout1_rng_));
  for (const auto* s : sample(data_.target_side, half, step1_rng_))
    tgt.push_back(model_.discriminator().score(ad::grad_reverse(model_.hidden(s->tokens), grl), &dropout1_rng_));
  ad::Var j_q = wasserstein_objective(src, tgt);
  adversarial_opt_.zero_grad();
  critic_opt_.zero_grad();
  // The discriminator's own loss; the reversal hands the encoder the
  // opposite direction.
  ad::backward(ad::scale(j_q, -1.0));
  adversarial_opt_.step();
  critic_opt_.zero_grad();
  return j_q.value().item();
}

LogRecord Trainer::multiobjective_update(std::size_t step) {
  const std::size_t n_groups = std::max<std::size_t>(1, cfg_.batch_size / data_.variants.size());
  const auto groups = next_groups(n_groups);
  const double beta = effective_beta();

  std::vector<ad::Var> probs;
  std::vector<std::vector<Tag>> gold;
  std::vector<std::pair<ad::Var, ad::Var>> pairs;
  for (const auto* ex : groups) {
    std::array<ad::Var, 4> view_probs;
    for (Variant v : data_.variants) {
      const auto& s = ex->view(v);
      view_probs[static_cast<std::size_t>(v)] = model_.tag_probs(model_.hidden(s.tokens), &dropout2_rng_);
      probs.push_back(view_probs[static_cast<std::size_t>(v)]);
      gold.push_back(s.tags);
    }
    if (beta == 0.0) continue;
    for (const auto& a : ex->alignments) {
      const bool wanted = (a.a == Variant::S && a.b == Variant::T && cfg_.pairs.source_target) ||
                          (a.a == Variant::S && a.b == Variant::ST && cfg_.pairs.source_switched) ||
                          (a.a == Variant::T && a.b == Variant::TS && cfg_.pairs.target_switched);
      const ad::Var& pa = view_probs[static_cast<std::size_t>(a.a)];
      const ad::Var& pb = view_probs[static_cast<std::size_t>(a.b)];
      if (!wanted || !pa || !pb) continue;
      pairs.emplace_back(span_distribution(pa, ex->view(a.a).spans()[a.span_a]),
                         span_distribution(pb, ex->view(a.b).spans()[a.span_b]));
    }
  }

  ad::Var ce = ce_loss(probs, gold);
  ad::Var cons = consistency_loss(pairs);
  ad::Var total = beta == 0.0 ? ce : ad::add(ce, ad::scale(cons, beta));

  task_opt_.zero_grad();
  ad::backward(total);
  task_opt_.step();

  LogRecord r;
  r.step = step;
  r.stage = "step2";
  r.loss_ce = ce.value().item();
  r.loss_cons = cons.value().item();
  r.loss_total = total.value().item();
  return r;
}

double Trainer::dev_f1() const {
  if (data_.dev.empty()) return 0.0;
  return evaluate_sentences(model_, data_.dev).f1;
}

void Trainer::run_step1(std::size_t steps, TrainResult& result, const TrainObserver* observer) {
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t step = ++step1_done_;
    for (std::size_t k = 0; k < cfg_.critic_iters; ++k) {
      critic_update();
      if (observer && observer->after_critic_update) observer->after_critic_update(step, k, model_);
    }
    LogRecord r;
    r.step = step;
    r.stage = "step1";
    r.j_q = encoder_adversarial_update();
    result.final_j_q = *r.j_q;
    result.log.push_back(r);
    if (observer && observer->on_log) observer->on_log(r);
  }
}

void Trainer::run_step2(std::size_t steps, TrainResult& result, const TrainObserver* observer) {
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t step = ++step2_done_;
    LogRecord r = multiobjective_update(step);
    if (step % cfg_.eval_interval == 0 || step == cfg_.step2_steps) {
      const double f1 = dev_f1();
      r.dev_f1 = f1;
      result.checkpoints.push_back({step, f1, snapshot(model_.all_params())});
    }
    result.log.push_back(r);
    if (observer && observer->on_log) observer->on_log(r);
  }
}

TrainResult Trainer::run(const TrainObserver* observer) {
  TrainResult result;
  result.init_hash = param_hash(model_.all_params());
  const std::size_t s1 = uses_step1() ? cfg_.step1_steps : 0;
  if (cfg_.schedule == Schedule::Sequential) {
    run_step1(s1, result, observer);
    result.after_step1_hash = param_hash(model_.all_params());
    run_step2(cfg_.step2_steps, result, observer);
  } else {
    const std::size_t rounds = (cfg_.step2_steps + cfg_.eval_interval - 1) / cfg_.eval_interval;
    for (std::size_t r = 0; r < rounds; ++r) {
      // spread the Step-1 budget evenly over the rounds
      const std::size_t s1_chunk = s1 * (r + 1) / rounds - s1 * r / rounds;
      run_step1(s1_chunk, result, observer);
      if (r + 1 == rounds) result.after_step1_hash = param_hash(model_.all_params());
      const std::size_t s2_chunk = std::min(cfg_.eval_interval, cfg_.step2_steps - step2_done_);
      run_step2(s2_chunk, result, observer);
    }
  }
  const Checkpoint& best = select_checkpoint(result.checkpoints, cfg_.selection_window);
  restore(model_.all_params(), best.params);
  result.selected_step = best.step;
  result.selected_dev_f1 = best.dev_f1;
  return result;
}

}  // namespace msmo
