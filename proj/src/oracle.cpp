#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "legend/ordering.hpp"

namespace legend {

namespace {

constexpr PartitionId kNone = 0xffffffffu;

struct Searcher {
  std::uint32_t n;
  bool property1;
  std::uint32_t num_pairs;
  std::uint32_t full_mask_bits;

  // Best sequence found for the current threshold.
  std::vector<BufferStateSequence::Swap> path;
  std::vector<BufferStateSequence::Swap> witness;
  bool found = false;

  // Key -> fewest swaps used when this position was reached at the current
  // threshold; positions reached again with >= swaps are pruned.
  std::unordered_map<std::uint64_t, std::uint8_t> memo;

  std::uint32_t pair_bit(PartitionId a, PartitionId b) const {
    if (a > b) std::swap(a, b);
    // index of pair (a,b), a < b, in colex order
    return b * (b - 1) / 2 + a;
  }

  std::uint32_t state_mask(const std::array<PartitionId, 3>& buf) const {
    return (1u << pair_bit(buf[0], buf[1])) | (1u << pair_bit(buf[0], buf[2])) |
           (1u << pair_bit(buf[1], buf[2]));
  }

  std::uint64_t key(const std::array<PartitionId, 3>& buf, PartitionId last,
                    std::uint32_t mask) const {
    std::uint64_t k = 0;
    for (PartitionId id : buf) k = k * 8 + id;  // n <= 7 so ids fit 3 bits
    k = k * 9 + (last == kNone ? 8 : last);
    return (k << 21) | mask;
  }

  bool dfs(std::array<PartitionId, 3> buf, std::uint32_t mask, PartitionId last,
           PartitionId max_seen, std::uint32_t used, std::uint32_t budget) {
    const std::uint32_t full = (1u << num_pairs) - 1;
    if (mask == full) {
      witness = path;
      found = true;
      return true;
    }
    const std::uint32_t uncovered = static_cast<std::uint32_t>(__builtin_popcount(full & ~mask));
    if (used + (uncovered + 1) / 2 > budget) return false;

    const std::uint64_t k = key(buf, last, mask);
    auto it = memo.find(k);
    if (it != memo.end() && it->second <= used) return false;
    memo[k] = static_cast<std::uint8_t>(used);

    // Candidate loads: any already-seen id plus one representative unseen id
    // (unseen ids are interchangeable).
    std::vector<PartitionId> loads;
    for (PartitionId id = 0; id <= max_seen && id < n; ++id) {
      if (id != buf[0] && id != buf[1] && id != buf[2]) loads.push_back(id);
    }
    if (max_seen + 1 < n) loads.push_back(max_seen + 1);

    struct Move {
      PartitionId evict, load;
      std::uint32_t gained;
    };
    std::vector<Move> moves;
    for (PartitionId evict : buf) {
      if (property1 && evict == last) continue;
      for (PartitionId load : loads) {
        std::array<PartitionId, 3> next = buf;
        for (auto& slot : next) {
          if (slot == evict) slot = load;
        }
        std::sort(next.begin(), next.end());
        const std::uint32_t gained =
            static_cast<std::uint32_t>(__builtin_popcount(state_mask(next) & ~mask));
        moves.push_back({evict, load, gained});
      }
    }
    std::stable_sort(moves.begin(), moves.end(),
                     [](const Move& a, const Move& b) { return a.gained > b.gained; });

    for (const Move& m : moves) {
      std::array<PartitionId, 3> next = buf;
      for (auto& slot : next) {
        if (slot == m.evict) slot = m.load;
      }
      std::sort(next.begin(), next.end());
      path.push_back({m.evict, m.load});
      const PartitionId next_seen = std::max(max_seen, m.load);
      if (dfs(next, mask | state_mask(next), m.load, next_seen, used + 1, budget)) return true;
      path.pop_back();
    }
    return false;
  }
};

}  // namespace

OracleResult oracle_min_io(std::uint32_t n, bool require_property1) {
  if (n < 4) throw std::invalid_argument("oracle requires n >= 4");
  if (n > 7) throw std::invalid_argument("oracle exhaustive budget is n <= 7");

  Searcher s;
  s.n = n;
  s.property1 = require_property1;
  s.num_pairs = n * (n - 1) / 2;

  const std::array<PartitionId, 3> start = {0, 1, 2};
  const std::uint32_t full = (1u << s.num_pairs) - 1;
  const std::uint32_t mask0 = s.state_mask(start);

  // Iterative deepening over swap count; each swap covers at most two new
  // pairs, which gives the starting threshold.
  const std::uint32_t uncovered0 = static_cast<std::uint32_t>(__builtin_popcount(full & ~mask0));
  for (std::uint32_t budget = (uncovered0 + 1) / 2;; ++budget) {
    s.memo.clear();
    s.path.clear();
    s.found = false;
    if (s.dfs(start, mask0, kNone, 2, 0, budget)) break;
  }

  OracleResult result;
  result.witness.n = n;
  std::array<PartitionId, 3> buf = start;
  result.witness.states.push_back(buf);
  for (const auto& swap : s.witness) {
    for (auto& slot : buf) {
      if (slot == swap.evicted) slot = swap.loaded;
    }
    std::sort(buf.begin(), buf.end());
    result.witness.states.push_back(buf);
    result.witness.swaps.push_back(swap);
  }
  result.min_states = static_cast<std::uint32_t>(result.witness.states.size());
  return result;
}

}  // namespace legend
