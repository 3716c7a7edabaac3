#include "berd/encoder.hpp"

#include <algorithm>
#include <fstream>

#include "berd/errors.hpp"
#include "berd/log.hpp"
#include "berd/ops.hpp"
#include "binary_io.hpp"

namespace berd {

PreparedEvent prepare_event(const SentenceRecord& record, std::size_t event_index,
                            const ModelVocabulary& vocab, EventRef ref) {
  const EventInstance& ev = record.events.at(event_index);
  PreparedEvent out;
  out.ref = ref;
  out.sentence_id = record.sentence.id;
  out.event_index = event_index;
  out.sentence_length = record.sentence.tokens.size();
  const auto tokens = append_event_marker(record.sentence.tokens, ev.event_type, &vocab.event_types);
  out.token_ids.reserve(tokens.size());
  for (const auto& t : tokens) out.token_ids.push_back(vocab.word_id(t));
  out.event_type = vocab.event_type_id(ev.event_type);
  out.trigger_start = ev.trigger_start;
  out.trigger_end = ev.trigger_end;
  for (const auto& e : order_entities(record.entities)) {
    out.entities.push_back({e.id, e.start, e.end});
    const std::string_view role = ev.role_of(e.id);
    auto id = vocab.roles.find(role);
    if (!id) {
      log::warn("record '" + record.sentence.id + "': role '" + std::string(role) +
                "' unknown to the model; treated as N/A");
    }
    out.gold_roles.push_back(id.value_or(0));
  }
  return out;
}

std::vector<PreparedEvent> prepare_corpus(const Corpus& corpus, const ModelVocabulary& vocab) {
  std::vector<PreparedEvent> out;
  for (const auto& ref : corpus.events()) {
    out.push_back(prepare_event(corpus.record(ref), ref.event, vocab, ref));
  }
  return out;
}

std::vector<int> relative_position_ids(std::size_t length, std::size_t start, std::size_t end,
                                       int clip) {
  std::vector<int> ids(length);
  for (std::size_t j = 0; j < length; ++j) {
    long d = 0;
    if (j < start) {
      d = static_cast<long>(j) - static_cast<long>(start);
    } else if (j >= end) {
      d = static_cast<long>(j) - static_cast<long>(end - 1);
    }
    d = std::clamp<long>(d, -clip, clip);
    ids[j] = static_cast<int>(d + clip);
  }
  return ids;
}

template <typename T>
Var ReferenceEncoder<T>::encode(Graph<T>& g, const PreparedEvent& event) const {
  const std::size_t n = event.length();
  const auto trig = relative_position_ids(n, event.trigger_start, event.trigger_end, position_clip_);
  const std::vector<int> types(n, event.event_type);
  const Var parts[] = {
      ops::gather_rows(g, g.param(embeddings_.word), event.token_ids),
      ops::gather_rows(g, g.param(embeddings_.position_trigger), trig),
      ops::gather_rows(g, g.param(embeddings_.position_focus), trig),
      ops::gather_rows(g, g.param(embeddings_.event_type), types),
  };
  Var h = ops::concat<T>(g, parts);
  for (const auto& layer : layers_) {
    Var z = ops::tanh(g, ops::conv1d_same(g, h, g.param(layer.kernel), g.param(layer.bias)));
    h = g.value(h).cols() == g.value(z).cols() ? ops::add(g, h, z) : z;
  }
  return h;
}

void HiddenStateTable::insert(const std::string& key, Tensor<float> hidden) {
  if (hidden.rank() != 2) throw ValidationError("hidden state '" + key + "' must be a matrix");
  if (records_.empty()) hidden_dim_ = hidden.cols();
  if (hidden.cols() != hidden_dim_) {
    throw ValidationError("hidden state '" + key + "' has width " + std::to_string(hidden.cols()) +
                          ", table width is " + std::to_string(hidden_dim_));
  }
  records_[key] = std::move(hidden);
}

const Tensor<float>* HiddenStateTable::find(const std::string& sentence_id,
                                            std::size_t event_index) const {
  if (auto it = records_.find(key(sentence_id, event_index)); it != records_.end()) {
    return &it->second;
  }
  if (auto it = records_.find(sentence_id); it != records_.end()) return &it->second;
  return nullptr;
}

std::string HiddenStateTable::key(const std::string& sentence_id, std::size_t event_index) {
  return sentence_id + "#" + std::to_string(event_index);
}

namespace {
constexpr char kHiddenMagic[9] = "BERDHID1";
constexpr std::uint32_t kHiddenVersion = 1;
}  // namespace

HiddenStateTable HiddenStateTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open hidden-state file " + path.string());
  binary::expect_magic(in, kHiddenMagic, path.string());
  const auto version = binary::read<std::uint32_t>(in, "version");
  if (version != kHiddenVersion) {
    throw ParseError(path.string() + ": unsupported hidden-state version " + std::to_string(version));
  }
  const auto count = binary::read<std::uint32_t>(in, "record count");
  HiddenStateTable table;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key = binary::read_string(in, "record key");
    const auto rows = binary::read<std::uint32_t>(in, "rows");
    const auto cols = binary::read<std::uint32_t>(in, "cols");
    auto data = binary::read_array<float>(in, static_cast<std::size_t>(rows) * cols, "hidden states");
    table.insert(key, Tensor<float>({rows, cols}, std::move(data)));
  }
  return table;
}

void HiddenStateTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write hidden-state file " + path.string());
  out.write(kHiddenMagic, 8);
  binary::write<std::uint32_t>(out, kHiddenVersion);
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(records_.size()));
  for (const auto& [key, t] : records_) {
    binary::write_string(out, key);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
    binary::write_array(out, t.data(), t.size());
  }
}

template <typename T>
PrecomputedEncoder<T>::PrecomputedEncoder(std::shared_ptr<const HiddenStateTable> table,
                                          std::size_t hidden_dim)
    : table_(std::move(table)), hidden_dim_(hidden_dim) {
  if (table_->size() > 0 && table_->hidden_dim() != hidden_dim_) {
    throw ValidationError("precomputed hidden states have width " +
                          std::to_string(table_->hidden_dim()) + " but the model expects " +
                          std::to_string(hidden_dim_));
  }
}

template <typename T>
Var PrecomputedEncoder<T>::encode(Graph<T>& g, const PreparedEvent& event) const {
  const Tensor<float>* h = table_->find(event.sentence_id, event.event_index);
  if (h == nullptr) {
    throw std::out_of_range("no precomputed hidden states for sentence '" + event.sentence_id +
                            "' (event " + std::to_string(event.event_index) + ")");
  }
  if (h->rows() != event.length()) {
    throw ValidationError("precomputed hidden states for '" + event.sentence_id + "' have " +
                          std::to_string(h->rows()) + " rows, expected " +
                          std::to_string(event.length()));
  }
  return g.constant(h->cast<T>());
}

template class ReferenceEncoder<float>;
template class ReferenceEncoder<double>;
template class PrecomputedEncoder<float>;
template class PrecomputedEncoder<double>;

}  // namespace berd
