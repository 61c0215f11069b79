#include "legend/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

namespace legend {

namespace {

bool parse_u64(std::string_view field, std::uint64_t& out) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == '\t' || line[pos] == ' ')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != '\t' && line[end] != ' ') ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

}  // namespace

Graph ingest(const std::filesystem::path& path, EdgeFileFormat format,
             const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open edge file: " + path.string());

  const std::size_t want_cols = format == EdgeFileFormat::kTriples ? 3 : 2;

  Graph g;
  std::unordered_map<std::uint64_t, NodeId> node_map;
  std::unordered_map<std::uint64_t, RelId> rel_map;
  std::uint64_t max_node = 0;
  std::uint64_t max_rel = 0;

  auto map_node = [&](std::uint64_t raw) -> NodeId {
    if (!options.remap_ids) {
      max_node = std::max(max_node, raw);
      return static_cast<NodeId>(raw);
    }
    auto [it, inserted] = node_map.emplace(raw, static_cast<NodeId>(node_map.size()));
    (void)inserted;
    return it->second;
  };
  auto map_rel = [&](std::uint64_t raw) -> RelId {
    if (!options.remap_ids) {
      max_rel = std::max(max_rel, raw);
      return static_cast<RelId>(raw);
    }
    auto [it, inserted] = rel_map.emplace(raw, static_cast<RelId>(rel_map.size()));
    (void)inserted;
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view(line);
    if (view.empty()) continue;
    if (view.front() == '#') continue;

    const auto fields = split_fields(view);
    if (fields.empty()) continue;
    if (fields.size() != want_cols) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(want_cols) + " columns, got " +
                       std::to_string(fields.size()));
    }
    std::uint64_t cols[3] = {0, 0, 0};
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_u64(fields[i], cols[i])) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed integer field '" +
                         std::string(fields[i]) + "'");
      }
    }

    Edge e;
    if (format == EdgeFileFormat::kTriples) {
      e.src = map_node(cols[0]);
      e.rel = map_rel(cols[1]);
      e.dst = map_node(cols[2]);
    } else {
      e.src = map_node(cols[0]);
      e.rel = kNoRelation;
      e.dst = map_node(cols[1]);
    }
    g.edges.push_back(e);
  }

  if (g.edges.empty()) throw ParseError("edge file has no edges: " + path.string());

  if (options.remap_ids) {
    g.num_nodes = node_map.size();
    g.num_relations = rel_map.size();
  } else {
    g.num_nodes = max_node + 1;
    g.num_relations = format == EdgeFileFormat::kTriples ? max_rel + 1 : 0;
  }
  return g;
}

PartitionPlan make_partition_plan(const Graph& g, std::uint32_t n) {
  if (n < 1) throw std::invalid_argument("partition count must be >= 1");
  if (n > g.num_nodes) throw std::invalid_argument("partition count exceeds node count");
  if (g.edges.empty()) throw std::invalid_argument("graph has no edges");

  PartitionPlan plan;
  plan.n = n;
  plan.num_nodes = g.num_nodes;
  plan.stride = (g.num_nodes + n - 1) / n;

  const std::size_t buckets = static_cast<std::size_t>(n) * n;
  std::vector<std::uint64_t> sizes(buckets, 0);
  for (const Edge& e : g.edges) {
    const std::size_t b =
        static_cast<std::size_t>(plan.partition_of(e.src)) * n + plan.partition_of(e.dst);
    ++sizes[b];
  }

  plan.bucket_offsets.assign(buckets + 1, 0);
  for (std::size_t b = 0; b < buckets; ++b) plan.bucket_offsets[b + 1] = plan.bucket_offsets[b] + sizes[b];

  plan.edge_order.resize(g.edges.size());
  std::vector<std::uint64_t> cursor(plan.bucket_offsets.begin(), plan.bucket_offsets.end() - 1);
  for (std::size_t idx = 0; idx < g.edges.size(); ++idx) {
    const Edge& e = g.edges[idx];
    const std::size_t b =
        static_cast<std::size_t>(plan.partition_of(e.src)) * n + plan.partition_of(e.dst);
    plan.edge_order[cursor[b]++] = idx;
  }
  return plan;
}

void write_graph(const Graph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  std::ofstream bin(dir / "edges.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("cannot write " + (dir / "edges.bin").string());
  static_assert(sizeof(Edge) == 12, "edge record layout");
  bin.write(reinterpret_cast<const char*>(g.edges.data()),
            static_cast<std::streamsize>(g.edges.size() * sizeof(Edge)));
  if (!bin) throw std::runtime_error("short write to edges.bin");
  bin.close();

  nlohmann::json meta{
      {"num_nodes", g.num_nodes},
      {"num_relations", g.num_relations},
      {"num_edges", g.edges.size()},
  };
  std::ofstream out(dir / "graph_meta.json", std::ios::trunc);
  out << meta.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write graph_meta.json");
}

Graph read_graph(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "graph_meta.json");
  if (!meta_in) throw std::runtime_error("missing graph_meta.json in " + dir.string());
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  Graph g;
  g.num_nodes = meta.at("num_nodes").get<std::uint64_t>();
  g.num_relations = meta.at("num_relations").get<std::uint64_t>();
  const auto num_edges = meta.at("num_edges").get<std::uint64_t>();

  std::ifstream bin(dir / "edges.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("missing edges.bin in " + dir.string());
  g.edges.resize(num_edges);
  bin.read(reinterpret_cast<char*>(g.edges.data()),
           static_cast<std::streamsize>(num_edges * sizeof(Edge)));
  if (bin.gcount() != static_cast<std::streamsize>(num_edges * sizeof(Edge))) {
    throw std::runtime_error("edges.bin shorter than metadata claims");
  }
  return g;
}

}  // namespace legend
