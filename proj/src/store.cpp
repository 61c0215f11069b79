#include "legend/store.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "legend/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "partition files are little-endian float32");

namespace legend {

namespace {

constexpr std::uint64_t kRelationStream = 0x52454c53ull;  // distinct seed tag for relations.bin

void fill_uniform_rows(std::vector<float>& out, std::uint64_t rows, std::uint32_t dim,
                       std::uint64_t stream_seed) {
  const double bound = 0.5 / std::sqrt(static_cast<double>(dim));
  Rng rng(stream_seed);
  out.resize(rows * dim);
  for (auto& v : out) v = static_cast<float>(rng.uniform(-bound, bound));
}

void write_blob(const std::filesystem::path& path, const std::vector<float>& emb,
                const std::vector<float>& acc, const std::string& what) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + what + ": " + path.string());
  out.write(reinterpret_cast<const char*>(emb.data()),
            static_cast<std::streamsize>(emb.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(acc.data()),
            static_cast<std::streamsize>(acc.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write to " + what + ": " + path.string());
}

void read_blob(const std::filesystem::path& path, std::uint64_t rows, std::uint32_t dim,
               std::vector<float>& emb, std::vector<float>& acc, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + what + ": " + path.string());
  const std::uint64_t expected = partition_file_bytes(rows, dim);
  const std::uint64_t actual = std::filesystem::file_size(path);
  if (actual != expected) {
    throw std::runtime_error(what + " has " + std::to_string(actual) + " bytes, expected " +
                             std::to_string(expected) + ": " + path.string());
  }
  emb.resize(rows * dim);
  acc.resize(rows * dim);
  in.read(reinterpret_cast<char*>(emb.data()),
          static_cast<std::streamsize>(emb.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(acc.data()),
          static_cast<std::streamsize>(acc.size() * sizeof(float)));
  if (!in) throw std::runtime_error("short read from " + what + ": " + path.string());
}

}  // namespace

EmbeddingStore EmbeddingStore::create(const PartitionPlan& plan, std::uint32_t dim,
                                      std::uint64_t num_relations, std::uint64_t seed,
                                      const std::filesystem::path& dir) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  std::filesystem::create_directories(dir);

  EmbeddingStore store;
  store.dir_ = dir;
  store.n_ = plan.n;
  store.dim_ = dim;
  store.num_nodes_ = plan.num_nodes;
  store.num_relations_ = num_relations;
  store.stride_ = plan.stride;
  store.seed_ = seed;

  for (PartitionId p = 0; p < plan.n; ++p) {
    const std::uint64_t rows = store.part_node_count(p);
    std::vector<float> emb;
    fill_uniform_rows(emb, rows, dim, derive_seed(seed, p));
    std::vector<float> acc(rows * dim, 0.0f);
    write_blob(store.partition_path(p), emb, acc, "partition " + std::to_string(p));
  }
  if (num_relations > 0) {
    std::vector<float> emb;
    fill_uniform_rows(emb, num_relations, dim, derive_seed(seed, kRelationStream));
    std::vector<float> acc(num_relations * dim, 0.0f);
    write_blob(store.relations_path(), emb, acc, "relations");
  }

  nlohmann::json ranges = nlohmann::json::array();
  for (PartitionId p = 0; p < plan.n; ++p) {
    ranges.push_back({{"first", store.part_begin(p)}, {"count", store.part_node_count(p)}});
  }
  nlohmann::json meta{
      {"n", store.n_},          {"dim", store.dim_},
      {"num_nodes", store.num_nodes_}, {"num_relations", store.num_relations_},
      {"stride", store.stride_},       {"seed", store.seed_},
      {"ranges", ranges},
  };
  std::ofstream out(dir / "store_meta.json", std::ios::trunc);
  out << meta.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write store_meta.json");
  return store;
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& dir) {
  std::ifstream in(dir / "store_meta.json");
  if (!in) throw std::runtime_error("missing store_meta.json in " + dir.string());
  nlohmann::json meta = nlohmann::json::parse(in);

  EmbeddingStore store;
  store.dir_ = dir;
  store.n_ = meta.at("n").get<std::uint32_t>();
  store.dim_ = meta.at("dim").get<std::uint32_t>();
  store.num_nodes_ = meta.at("num_nodes").get<std::uint64_t>();
  store.num_relations_ = meta.at("num_relations").get<std::uint64_t>();
  store.stride_ = meta.at("stride").get<std::uint64_t>();
  store.seed_ = meta.at("seed").get<std::uint64_t>();
  return store;
}

EmbeddingPartition EmbeddingStore::load_partition(PartitionId id) const {
  if (id >= n_) throw std::invalid_argument("partition id out of range");
  EmbeddingPartition part;
  part.id = id;
  part.dim = dim_;
  part.node_count = part_node_count(id);
  read_blob(partition_path(id), part.node_count, dim_, part.embeddings, part.opt_states,
            "partition " + std::to_string(id));
  return part;
}

void EmbeddingStore::save_partition(const EmbeddingPartition& part) const {
  if (part.id >= n_) throw std::invalid_argument("partition id out of range");
  if (part.dim != dim_ || part.node_count != part_node_count(part.id) ||
      part.embeddings.size() != part.node_count * dim_ ||
      part.opt_states.size() != part.node_count * dim_) {
    throw std::invalid_argument("partition shape does not match store layout");
  }
  write_blob(partition_path(part.id), part.embeddings, part.opt_states,
             "partition " + std::to_string(part.id));
}

RelationTable EmbeddingStore::load_relations() const {
  RelationTable rels;
  rels.dim = dim_;
  rels.count = num_relations_;
  if (num_relations_ == 0) return rels;
  read_blob(relations_path(), rels.count, dim_, rels.embeddings, rels.opt_states, "relations");
  return rels;
}

void EmbeddingStore::save_relations(const RelationTable& rels) const {
  if (rels.count != num_relations_ || rels.dim != dim_) {
    throw std::invalid_argument("relation table shape does not match store layout");
  }
  if (num_relations_ == 0) return;
  write_blob(relations_path(), rels.embeddings, rels.opt_states, "relations");
}

}  // namespace legend
