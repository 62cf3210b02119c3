#include "fitb/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "fitb/error.hpp"

namespace fitb {
namespace {

constexpr std::string_view kMagic = "FEMB";
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::string_view to_string(Modality modality) {
  return modality == Modality::Image ? "image" : "text";
}

std::string_view to_string(RepresentationMode mode) {
  switch (mode) {
    case RepresentationMode::ImageOnly: return "image";
    case RepresentationMode::TextOnly: return "text";
    case RepresentationMode::TextAndImage: return "both";
  }
  return "unknown";
}

RepresentationMode parse_mode(std::string_view name) {
  if (name == "image") return RepresentationMode::ImageOnly;
  if (name == "text") return RepresentationMode::TextOnly;
  if (name == "both") return RepresentationMode::TextAndImage;
  fail(ErrorKind::InvalidArgument, fmt::format("unknown mode '{}' (expected text|image|both)", name));
}

void EmbeddingTable::add(std::string product_id, std::span<const double> vector) {
  if (product_id.empty()) fail(ErrorKind::MalformedRecord, "empty product id");
  if (vector.size() != dim_) {
    fail(ErrorKind::DimensionMismatch,
         fmt::format("product '{}' has {} components, table dim is {}", product_id, vector.size(), dim_));
  }
  if (index_.contains(product_id)) fail(ErrorKind::DuplicateId, fmt::format("duplicate product id '{}'", product_id));
  for (double v : vector) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, fmt::format("non-finite component in '{}'", product_id));
  }
  index_.emplace(product_id, ids_.size());
  ids_.push_back(std::move(product_id));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

std::optional<std::span<const double>> EmbeddingTable::find(const std::string& product_id) const {
  const auto it = index_.find(product_id);
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

std::vector<ModalityEmbedding> EmbeddingTable::records() const {
  std::vector<ModalityEmbedding> out;
  out.reserve(size());
  for (std::size_t r = 0; r < size(); ++r) {
    const auto v = row(r);
    out.push_back({ids_[r], {v.begin(), v.end()}});
  }
  return out;
}

EmbeddingTable parse_embeddings(std::string_view bytes, Modality expected_modality, std::string_view source) {
  detail::ByteReader in(bytes);
  std::string_view magic;
  if (!in.bytes(4, magic) || magic != kMagic) {
    fail(ErrorKind::BadMagic, fmt::format("{}: missing FEMB magic at offset 0", source));
  }
  std::uint16_t version = 0;
  std::uint8_t modality = 0;
  std::uint8_t reserved = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  if (!in.uint(version)) fail(ErrorKind::TruncatedRecord, fmt::format("{}: header truncated at offset 4", source));
  if (version != kVersion) {
    fail(ErrorKind::BadVersion, fmt::format("{}: unsupported version {} at offset 4", source, version));
  }
  if (!in.uint(modality) || !in.uint(reserved) || !in.uint(dim) || !in.uint(count)) {
    fail(ErrorKind::TruncatedRecord, fmt::format("{}: header truncated at offset {}", source, in.offset()));
  }
  if (modality != static_cast<std::uint8_t>(expected_modality)) {
    fail(ErrorKind::ModalityMismatch,
         fmt::format("{}: modality byte {} at offset 6, expected {} ({})", source, modality,
                     static_cast<int>(expected_modality), to_string(expected_modality)));
  }
  if (dim == 0) fail(ErrorKind::DimensionMismatch, fmt::format("{}: zero dimension at offset 8", source));

  EmbeddingTable table(dim);
  std::vector<double> vector(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::size_t record_offset = in.offset();
    std::uint16_t id_len = 0;
    std::string_view id;
    if (!in.uint(id_len) || !in.bytes(id_len, id)) {
      fail(ErrorKind::TruncatedRecord,
           fmt::format("{}: record {} of {} truncated at offset {}", source, r, count, record_offset));
    }
    if (id.empty()) fail(ErrorKind::MalformedRecord, fmt::format("{}: empty id at offset {}", source, record_offset));
    for (std::uint32_t c = 0; c < dim; ++c) {
      float value = 0.0F;
      if (!in.f32(value)) {
        fail(ErrorKind::TruncatedRecord,
             fmt::format("{}: record '{}' truncated at offset {}", source, id, in.offset()));
      }
      if (!std::isfinite(value)) {
        fail(ErrorKind::NonFinite,
             fmt::format("{}: non-finite component {} of '{}' at offset {}", source, c, id, in.offset() - 4));
      }
      vector[c] = static_cast<double>(value);
    }
    if (table.contains(std::string(id))) {
      fail(ErrorKind::DuplicateId, fmt::format("{}: duplicate id '{}' at offset {}", source, id, record_offset));
    }
    table.add(std::string(id), vector);
  }
  if (in.remaining() != 0) {
    fail(ErrorKind::MalformedRecord,
         fmt::format("{}: {} trailing bytes after record {} at offset {}", source, in.remaining(), count, in.offset()));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, Modality expected_modality) {
  return parse_embeddings(detail::read_file(path), expected_modality, path);
}

std::string encode_embeddings(const EmbeddingTable& table, Modality modality) {
  if (table.dim() == 0 || table.dim() > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorKind::DimensionMismatch, fmt::format("cannot encode dimension {}", table.dim()));
  }
  detail::ByteWriter out;
  out.bytes(kMagic);
  out.uint(kVersion);
  out.uint(static_cast<std::uint8_t>(modality));
  out.uint(std::uint8_t{0});
  out.uint(static_cast<std::uint32_t>(table.dim()));
  out.uint(static_cast<std::uint64_t>(table.size()));
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string& id = table.id_at(r);
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      fail(ErrorKind::InvalidArgument, fmt::format("product id longer than 65535 bytes: '{}...'", id.substr(0, 32)));
    }
    out.uint(static_cast<std::uint16_t>(id.size()));
    out.bytes(id);
    for (double v : table.row(r)) {
      const auto narrowed = static_cast<float>(v);
      if (!std::isfinite(narrowed)) fail(ErrorKind::NonFinite, fmt::format("'{}' overflows 32-bit float", id));
      out.f32(narrowed);
    }
  }
  return out.data();
}

void write_embeddings(const EmbeddingTable& table, Modality modality, const std::string& path) {
  detail::write_file(path, encode_embeddings(table, modality));
}

void write_embeddings(std::span<const ModalityEmbedding> records, Modality modality, const std::string& path) {
  if (records.empty()) fail(ErrorKind::DimensionMismatch, "cannot infer dimension of an empty record list");
  EmbeddingTable table(records.front().vector.size());
  for (const auto& record : records) table.add(record.product_id, record.vector);
  write_embeddings(table, modality, path);
}

std::map<std::string, std::string> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest '" + path + "'");
  std::map<std::string, std::string> manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      fail(ErrorKind::MalformedRecord, fmt::format("{}:{}: expected product_id<TAB>metadata", path, line_no));
    }
    auto [it, inserted] = manifest.emplace(line.substr(0, tab), line.substr(tab + 1));
    if (!inserted) fail(ErrorKind::DuplicateId, fmt::format("{}:{}: duplicate id '{}'", path, line_no, it->first));
  }
  return manifest;
}

bool EmbeddingStore::supports(RepresentationMode mode) const {
  switch (mode) {
    case RepresentationMode::ImageOnly: return image_.has_value();
    case RepresentationMode::TextOnly: return text_.has_value();
    case RepresentationMode::TextAndImage: return image_.has_value() && text_.has_value();
  }
  return false;
}

std::size_t EmbeddingStore::input_dim(RepresentationMode mode) const {
  if (!supports(mode)) {
    fail(ErrorKind::InvalidArgument, fmt::format("store lacks the embeddings mode '{}' requires", to_string(mode)));
  }
  switch (mode) {
    case RepresentationMode::ImageOnly: return image_->dim();
    case RepresentationMode::TextOnly: return text_->dim();
    case RepresentationMode::TextAndImage: return image_->dim() + text_->dim();
  }
  return 0;
}

bool EmbeddingStore::has_product(const std::string& product_id, RepresentationMode mode) const {
  if (!supports(mode)) return false;
  const bool needs_image = mode != RepresentationMode::TextOnly;
  const bool needs_text = mode != RepresentationMode::ImageOnly;
  return (!needs_image || image_->contains(product_id)) && (!needs_text || text_->contains(product_id));
}

std::vector<std::string> EmbeddingStore::product_ids(RepresentationMode mode) const {
  std::vector<std::string> ids;
  if (!supports(mode)) return ids;
  const EmbeddingTable& primary = mode == RepresentationMode::TextOnly ? *text_ : *image_;
  for (const auto& id : primary.ids()) {
    if (has_product(id, mode)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::span<const double>> modality_parts(const EmbeddingStore& store, const std::string& product_id,
                                                    RepresentationMode mode) {
  auto lookup = [&](const std::optional<EmbeddingTable>& table, Modality modality) {
    if (!table) {
      fail(ErrorKind::MissingProduct,
           fmt::format("no {} embeddings loaded (needed for '{}')", to_string(modality), product_id));
    }
    auto found = table->find(product_id);
    if (!found) {
      fail(ErrorKind::MissingProduct, fmt::format("product '{}' has no {} embedding", product_id, to_string(modality)));
    }
    return *found;
  };
  std::vector<std::span<const double>> parts;
  if (mode != RepresentationMode::TextOnly) parts.push_back(lookup(store.image(), Modality::Image));
  if (mode != RepresentationMode::ImageOnly) parts.push_back(lookup(store.text(), Modality::Text));
  return parts;
}

std::vector<double> assemble_representation(const EmbeddingStore& store, const std::string& product_id,
                                            RepresentationMode mode) {
  std::vector<double> out;
  for (auto part : modality_parts(store, product_id, mode)) out.insert(out.end(), part.begin(), part.end());
  return out;
}

}  // namespace fitb
