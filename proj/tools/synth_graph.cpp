// Generates seeded multi-relation graphs with planted cluster structure:
// nodes belong to scattered clusters, each relation shifts the cluster ring,
// and destinations concentrate on a hub subset of the target cluster. Link
// prediction on such graphs is genuinely learnable, which makes them useful
// as reproducible stand-ins for real benchmark splits.
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "legend/rng.hpp"

using namespace legend;

namespace {

struct Params {
  std::uint64_t nodes = 15000;
  std::uint32_t clusters = 300;
  std::uint32_t relations = 40;
  std::uint64_t edges = 592000;
  std::uint64_t test_edges = 10000;
  double hub_fraction = 0.5;
  std::uint64_t seed = 7;
  bool untyped = false;
  std::string out_train;
  std::string out_test;
};

class Generator {
 public:
  explicit Generator(const Params& p) : p_(p) {
    members_.resize(p.clusters);
    for (std::uint64_t v = 0; v < p.nodes; ++v) members_[cluster_of(v)].push_back(v);
    hubs_.resize(p.clusters);
    for (std::uint32_t c = 0; c < p.clusters; ++c) {
      const std::size_t count =
          std::max<std::size_t>(1, static_cast<std::size_t>(members_[c].size() * p.hub_fraction));
      hubs_[c].assign(members_[c].begin(), members_[c].begin() + count);
    }
    Rng rng(derive_seed(p.seed, 0x73686966ull));
    shifts_.resize(p.relations);
    for (auto& s : shifts_) s = 1 + static_cast<std::uint32_t>(rng.next_below(p.clusters - 1));
  }

  std::uint32_t cluster_of(std::uint64_t v) const {
    return static_cast<std::uint32_t>((v * 2654435761ull + 12345) % p_.clusters);
  }

  void emit(const std::string& path, std::uint64_t count, std::uint64_t stream) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    Rng rng(derive_seed(p_.seed, 0x65646765ull, stream));
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t s = rng.next_below(p_.nodes);
      const std::uint32_t r =
          p_.untyped ? 0 : static_cast<std::uint32_t>(rng.next_below(p_.relations));
      const std::uint32_t target = (cluster_of(s) + shifts_[r]) % p_.clusters;
      const auto& pool = hubs_[target];
      const std::uint64_t d = pool[rng.next_below(pool.size())];
      if (p_.untyped) {
        out << s << '\t' << d << '\n';
      } else {
        out << s << '\t' << r << '\t' << d << '\n';
      }
    }
    if (!out) throw std::runtime_error("short write to " + path);
  }

 private:
  Params p_;
  std::vector<std::vector<std::uint64_t>> members_;
  std::vector<std::vector<std::uint64_t>> hubs_;
  std::vector<std::uint32_t> shifts_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seeded synthetic knowledge-graph generator"};
  Params p;
  app.add_option("--nodes", p.nodes, "node count");
  app.add_option("--clusters", p.clusters, "cluster count");
  app.add_option("--relations", p.relations, "relation count");
  app.add_option("--edges", p.edges, "training edge count");
  app.add_option("--test-edges", p.test_edges, "held-out edge count");
  app.add_option("--hub-fraction", p.hub_fraction, "fraction of each cluster used as destinations");
  app.add_option("--seed", p.seed, "RNG seed");
  app.add_flag("--untyped", p.untyped, "emit 2-column edges without relations");
  app.add_option("--out-train", p.out_train, "training TSV path")->required();
  app.add_option("--out-test", p.out_test, "held-out TSV path");
  CLI11_PARSE(app, argc, argv);

  try {
    if (p.clusters < 2 || p.nodes < p.clusters) {
      throw std::invalid_argument("need at least 2 clusters and nodes >= clusters");
    }
    Generator gen(p);
    gen.emit(p.out_train, p.edges, 0);
    if (!p.out_test.empty() && p.test_edges > 0) gen.emit(p.out_test, p.test_edges, 1);
    std::printf("wrote %llu train edges to %s", static_cast<unsigned long long>(p.edges),
                p.out_train.c_str());
    if (!p.out_test.empty()) {
      std::printf(" and %llu test edges to %s", static_cast<unsigned long long>(p.test_edges),
                  p.out_test.c_str());
    }
    std::printf("\n");
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
