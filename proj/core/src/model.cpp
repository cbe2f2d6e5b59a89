#include "msmo/model.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace msmo {

using ordered_json = nlohmann::ordered_json;

Model::Model(Vocabulary vocab, ModelConfig cfg, std::uint64_t seed) : vocab_(std::move(vocab)), cfg_(cfg) {
  Rng rng = make_rng(seed, 0x1417);
  encoder_ = std::make_unique<BiRnnEncoder>(BiRnnConfig{vocab_.size(), cfg.embedding_dim, cfg.hidden_dim}, rng);
  classifier_ = std::make_unique<Classifier>(encoder_->width(), cfg.keep_prob, rng);
  discriminator_ = std::make_unique<Discriminator>(encoder_->width(), cfg.keep_prob, rng);
}

Model Model::clone() const {
  Model copy(vocab_, cfg_, 0);
  restore(copy.all_params(), snapshot(all_params()));
  return copy;
}

ParamList Model::all_params() const {
  return concat(concat(encoder_params(), classifier_params()), discriminator_params());
}

ad::Var Model::hidden(const std::vector<std::string>& tokens) const {
  const auto ids = vocab_.ids(tokens);
  return encoder_->encode(ids);
}

std::vector<Tag> argmax_tags(const ad::Tensor& probs) {
  std::vector<Tag> out;
  out.reserve(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    out.push_back(Tag::from_id(best));
  }
  return out;
}

std::vector<Tag> Model::predict(const std::vector<std::string>& tokens) const {
  return argmax_tags(tag_probs(tokens, nullptr).value());
}

std::string checkpoint_json(const Model& model, const CheckpointMeta& meta) {
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["step"] = meta.step;
  j["dev_f1"] = meta.dev_f1;
  j["config_fingerprint"] = meta.config_fingerprint;
  j["model"] = {{"embedding_dim", model.config().embedding_dim},
                {"hidden_dim", model.config().hidden_dim},
                {"keep_prob", model.config().keep_prob}};
  j["vocab"] = model.vocab().tokens();
  ordered_json params = ordered_json::object();
  for (const auto& p : model.all_params()) {
    const auto& v = p.var.value();
    params[p.name] = {{"shape", {v.rows(), v.cols()}},
                      {"data", std::vector<double>(v.data().begin(), v.data().end())}};
  }
  j["params"] = params;
  return j.dump();
}

Model model_from_checkpoint_json(const std::string& text, CheckpointMeta* meta) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat)
    throw FormatError("checkpoint: unsupported format tag '" + j.value("format", "") + "'");
  try {
    ModelConfig cfg;
    cfg.embedding_dim = j.at("model").at("embedding_dim").get<std::size_t>();
    cfg.hidden_dim = j.at("model").at("hidden_dim").get<std::size_t>();
    cfg.keep_prob = j.at("model").at("keep_prob").get<double>();
    auto tokens = j.at("vocab").get<std::vector<std::string>>();
    if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>")
      throw FormatError("checkpoint: vocabulary lacks reserved entries");
    tokens.erase(tokens.begin(), tokens.begin() + 2);
    Model model(Vocabulary(tokens), cfg, 0);
    ParamSnapshot snap;
    for (const auto& p : model.all_params()) {
      const auto& entry = j.at("params").at(p.name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw FormatError("checkpoint: bad shape for " + p.name);
      snap.emplace_back(ad::Shape{shape[0], shape[1]}, entry.at("data").get<std::vector<double>>());
    }
    restore(model.all_params(), snap);
    if (meta) {
      meta->step = j.at("step").get<std::size_t>();
      meta->dev_f1 = j.at("dev_f1").get<double>();
      meta->config_fingerprint = j.at("config_fingerprint").get<std::string>();
    }
    return model;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << checkpoint_json(model, meta) << "\n";
}

Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_checkpoint_json(buf.str(), meta);
}

}  // namespace msmo
