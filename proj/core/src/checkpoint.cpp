#include "berd/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "berd/errors.hpp"
#include "binary_io.hpp"

namespace berd {
namespace {

constexpr char kMagic[9] = "BERDCKPT";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kFloat32 = 0;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const BerdModel<float>& model,
                     const RunConfig& config) {
  if (!(config.model == model.config())) {
    throw ValidationError("checkpoint: run config does not describe this model");
  }
  nlohmann::ordered_json meta;
  meta["config"] = nlohmann::ordered_json::parse(run_config_to_json(config));
  meta["vocabulary"] = {{"words", model.vocab().words.labels()},
                        {"event_types", model.vocab().event_types.labels()},
                        {"roles", model.vocab().roles.labels()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint " + path.string());
  out.write(kMagic, 8);
  binary::write<std::uint32_t>(out, kVersion);
  binary::write<std::uint64_t>(out, config.training.seed);
  binary::write_string(out, meta.dump());
  const auto& entries = model.store().entries();
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& p : entries) {
    binary::write_string(out, p.name);
    binary::write<std::uint8_t>(out, kFloat32);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    binary::write_array(out, p.value.data(), p.value.size());
  }
  if (!out) throw ParseError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  binary::expect_magic(in, kMagic, path.string());
  const auto version = binary::read<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.seed = binary::read<std::uint64_t>(in, "seed");
  const std::string meta_text = binary::read_string(in, "metadata");
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    ck.config = run_config_from_json(meta.at("config").dump());
    const auto& v = meta.at("vocabulary");
    ck.vocab.words = LabelVocabulary(v.at("words").get<std::vector<std::string>>());
    ck.vocab.event_types = LabelVocabulary(v.at("event_types").get<std::vector<std::string>>());
    ck.vocab.roles = LabelVocabulary(v.at("roles").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint metadata: " + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": bad checkpoint config: " + e.what());
  }
  const auto count = binary::read<std::uint32_t>(in, "parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = binary::read_string(in, "parameter name");
    if (binary::read<std::uint8_t>(in, "element type") != kFloat32) {
      throw ParseError(path.string() + ": parameter '" + name + "' has an unsupported element type");
    }
    const auto rank = binary::read<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 4) throw ParseError(path.string() + ": parameter '" + name + "' has bad rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(binary::read<std::uint32_t>(in, "dimension"));
    auto data = binary::read_array<float>(in, shape_size(shape), "parameter data");
    ck.params.add(name, Tensor<float>(std::move(shape), std::move(data)));
  }
  return ck;
}

BerdModel<float> model_from_checkpoint(const Checkpoint& checkpoint) {
  return BerdModel<float>(checkpoint.config.model, checkpoint.vocab, checkpoint.params);
}

}  // namespace berd
