#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fitb {

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

/// Which frozen embeddings make up a product representation. The numeric
/// values double as the FCKP mode code.
enum class RepresentationMode : std::uint8_t { ImageOnly = 0, TextOnly = 1, TextAndImage = 2 };

std::string_view to_string(Modality modality);
std::string_view to_string(RepresentationMode mode);

/// Parses the CLI spelling: "image", "text" or "both".
RepresentationMode parse_mode(std::string_view name);

struct ModalityEmbedding {
  std::string product_id;
  std::vector<double> vector;

  friend bool operator==(const ModalityEmbedding&, const ModalityEmbedding&) = default;
};

/// One modality's vectors, keyed by product id, insertion order preserved.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  /// Throws DuplicateId, DimensionMismatch or NonFinite.
  void add(std::string product_id, std::span<const double> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(const std::string& product_id) const { return index_.contains(product_id); }

  std::optional<std::span<const double>> find(const std::string& product_id) const;

  const std::string& id_at(std::size_t row) const { return ids_[row]; }
  std::span<const double> row(std::size_t row) const {
    return {values_.data() + row * dim_, dim_};
  }
  const std::vector<std::string>& ids() const { return ids_; }

  std::vector<ModalityEmbedding> records() const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
};

/// FEMB reader. Components are stored as 32-bit floats and widened to double.
EmbeddingTable load_embeddings(const std::string& path, Modality expected_modality);

/// Parses an FEMB image held in memory; `source` only labels error messages.
EmbeddingTable parse_embeddings(std::string_view bytes, Modality expected_modality,
                                std::string_view source = "<memory>");

/// FEMB writer. Components are narrowed to 32-bit floats; a table loaded from
/// FEMB therefore round-trips bit-exactly.
void write_embeddings(const EmbeddingTable& table, Modality modality, const std::string& path);
void write_embeddings(std::span<const ModalityEmbedding> records, Modality modality,
                      const std::string& path);
std::string encode_embeddings(const EmbeddingTable& table, Modality modality);

/// Opaque per-product metadata from a `product_id<TAB>metadata` manifest.
std::map<std::string, std::string> load_manifest(const std::string& path);

/// Immutable after construction; safe to share across reader threads.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::optional<EmbeddingTable> image, std::optional<EmbeddingTable> text)
      : image_(std::move(image)), text_(std::move(text)) {}

  const std::optional<EmbeddingTable>& image() const { return image_; }
  const std::optional<EmbeddingTable>& text() const { return text_; }

  bool supports(RepresentationMode mode) const;

  /// Representation length for `mode`; throws InvalidArgument if a required
  /// table is absent.
  std::size_t input_dim(RepresentationMode mode) const;

  /// True when every table `mode` needs holds `product_id`.
  bool has_product(const std::string& product_id, RepresentationMode mode) const;

  /// Product ids resolvable under `mode`, sorted.
  std::vector<std::string> product_ids(RepresentationMode mode) const;

 private:
  std::optional<EmbeddingTable> image_;
  std::optional<EmbeddingTable> text_;
};

/// Builds h_p for one product: the text vector, the image vector, or the
/// image vector followed by the text vector. Throws MissingProduct.
std::vector<double> assemble_representation(const EmbeddingStore& store,
                                            const std::string& product_id,
                                            RepresentationMode mode);

/// Spans over the raw modality vectors a mode uses (image first).
std::vector<std::span<const double>> modality_parts(const EmbeddingStore& store,
                                                    const std::string& product_id,
                                                    RepresentationMode mode);

}  // namespace fitb
