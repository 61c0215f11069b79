#include "legend/nvme_sim.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "legend/rng.hpp"

namespace legend::nvme {

BackingFile::BackingFile(std::filesystem::path path, std::uint64_t size_bytes)
    : path_(std::move(path)), size_(size_bytes) {
  if (!std::filesystem::exists(path_)) {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot create backing file: " + path_.string());
    if (size_ > 0) {
      out.seekp(static_cast<std::streamoff>(size_ - 1));
      out.put('\0');
    }
    if (!out) throw std::runtime_error("cannot size backing file: " + path_.string());
  }
  stream_.open(path_, std::ios::binary | std::ios::in | std::ios::out);
  if (!stream_) throw std::runtime_error("cannot open backing file: " + path_.string());
}

void BackingFile::read(std::uint64_t offset, std::span<std::byte> out) const {
  std::fill(out.begin(), out.end(), std::byte{0});
  if (offset >= size_) return;
  const std::uint64_t avail = std::min<std::uint64_t>(out.size(), size_ - offset);
  stream_.clear();
  stream_.seekg(static_cast<std::streamoff>(offset));
  stream_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(avail));
  if (!stream_) throw std::runtime_error("short read from backing file: " + path_.string());
}

void BackingFile::write(std::uint64_t offset, std::span<const std::byte> data) {
  if (offset >= size_) return;  // whole page is padding
  const std::uint64_t len = std::min<std::uint64_t>(data.size(), size_ - offset);
  stream_.clear();
  stream_.seekp(static_cast<std::streamoff>(offset));
  stream_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(len));
  if (!stream_) throw std::runtime_error("short write to backing file: " + path_.string());
}

void SubmitReport::merge(const SubmitReport& other) {
  commands += other.commands;
  batches += other.batches;
  sq_rings += other.sq_rings;
  cq_rings += other.cq_rings;
  lock_events += other.lock_events;
  submitted += other.submitted;
  completed += other.completed;
  traces.insert(traces.end(), other.traces.begin(), other.traces.end());
}

QueuePair::QueuePair(QueueConfig config, std::uint32_t id) : config_(config), id_(id) {
  if (config_.depth < 2) throw std::invalid_argument("queue depth must be at least 2");
  if (config_.page_size == 0) throw std::invalid_argument("page size must be positive");
}

std::uint32_t QueuePair::free_slots() const {
  const std::uint32_t backlog = (sq_tail + config_.depth - sq_head) % config_.depth;
  return config_.depth - 1 - backlog;
}

namespace {

std::vector<std::uint32_t> permutation(std::uint32_t count, Rng& rng) {
  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), 0u);
  for (std::uint32_t i = count; i > 1; --i) {
    const std::uint32_t j = static_cast<std::uint32_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

SubmitReport submit_batch(QueuePair& qp, BackingFile& store, std::span<std::byte> buffer,
                          std::span<const Command> commands, const AccessStrategy& strategy,
                          std::uint32_t workers, std::uint64_t seed) {
  if (workers == 0) throw std::invalid_argument("at least one worker required");
  if (commands.size() > qp.free_slots()) {
    throw std::runtime_error("queue full: batch of " + std::to_string(commands.size()) +
                             " exceeds " + std::to_string(qp.free_slots()) + " free slots");
  }
  const std::uint32_t page = qp.config().page_size;
  for (const Command& cmd : commands) {
    if (cmd.length != page || cmd.device_offset % page != 0) {
      throw std::invalid_argument("command must cover exactly one aligned page");
    }
    if (cmd.buffer_offset + cmd.length > buffer.size()) {
      throw std::invalid_argument("command buffer range out of bounds");
    }
  }

  Rng rng(seed);
  SubmitReport report;
  std::size_t next = 0;
  while (next < commands.size()) {
    const std::uint32_t round =
        static_cast<std::uint32_t>(std::min<std::size_t>(workers, commands.size() - next));
    const std::uint32_t tail_old = qp.sq_tail;
    const auto arrival = permutation(round, rng);

    // Enqueue: with precomputed positions every worker owns slot tail_old + i
    // regardless of arrival order; the atomic variant claims slots in arrival
    // order, one contended tail increment per command.
    BatchTrace trace;
    trace.tail_old = tail_old;
    std::vector<const Command*> slot_to_cmd(round, nullptr);
    if (strategy.enqueue == EnqueueMode::kBatchPrecomputed) {
      for (std::uint32_t w : arrival) {
        trace.slots.push_back((tail_old + w) % qp.depth());
        slot_to_cmd[w] = &commands[next + w];
      }
    } else {
      std::uint32_t claimed = 0;
      for (std::uint32_t w : arrival) {
        const std::uint32_t slot_index = claimed++;
        ++report.lock_events;
        trace.slots.push_back((tail_old + slot_index) % qp.depth());
        slot_to_cmd[slot_index] = &commands[next + w];
      }
    }
    qp.sq_tail = (tail_old + round) % qp.depth();
    report.submitted += round;

    if (strategy.doorbell == DoorbellMode::kFullCoalesced) {
      qp.sq_doorbell_writes += 1;
      report.sq_rings += 1;
    } else {
      qp.sq_doorbell_writes += round;
      report.sq_rings += round;
    }

    // Controller consumes the SQ in slot order and posts one completion per
    // command.
    for (std::uint32_t s = 0; s < round; ++s) {
      const Command& cmd = *slot_to_cmd[s];
      if (cmd.opcode == Opcode::kRead) {
        store.read(cmd.device_offset, buffer.subspan(cmd.buffer_offset, cmd.length));
      } else {
        store.write(cmd.device_offset, buffer.subspan(cmd.buffer_offset, cmd.length));
      }
      qp.sq_head = (qp.sq_head + 1) % qp.depth();
      qp.cq_tail = (qp.cq_tail + 1) % qp.depth();
      ++report.completed;
    }

    // Polling: either every worker rings the CQ doorbell for its own entry,
    // or workers bump a shared counter and the last one rings once.
    if (strategy.polling == PollingMode::kPerThread) {
      for (std::uint32_t i = 0; i < round; ++i) {
        qp.cq_head = (qp.cq_head + 1) % qp.depth();
        qp.cq_doorbell_writes += 1;
        report.cq_rings += 1;
      }
    } else {
      for (std::uint32_t i = 0; i < round; ++i) {
        qp.poll_counter += 1;
        if (i + 1 == round) {
          qp.cq_head = (qp.cq_head + round) % qp.depth();
          qp.cq_doorbell_writes += 1;
          report.cq_rings += 1;
        }
      }
    }

    report.commands += round;
    report.batches += 1;
    report.traces.push_back(std::move(trace));
    next += round;
  }
  return report;
}

TransferReport transfer_partition(BackingFile& store, std::uint64_t file_offset,
                                  std::uint64_t real_bytes, Direction direction,
                                  std::span<std::byte> buffer, const AccessStrategy& strategy,
                                  const QueueConfig& config, std::uint32_t queue_count,
                                  std::uint32_t workers_per_queue, std::uint64_t seed) {
  if (queue_count == 0) throw std::invalid_argument("at least one queue pair required");
  if (workers_per_queue == 0) throw std::invalid_argument("at least one worker required");
  if (real_bytes == 0) throw std::invalid_argument("transfer must move at least one byte");
  if (file_offset % config.page_size != 0) {
    throw std::invalid_argument("file offset must be page aligned");
  }
  const std::uint64_t pages = (real_bytes + config.page_size - 1) / config.page_size;
  if (buffer.size() < pages * config.page_size) {
    throw std::invalid_argument("transfer buffer smaller than padded partition");
  }
  std::vector<std::vector<Command>> per_queue(queue_count);
  for (std::uint64_t p = 0; p < pages; ++p) {
    Command cmd;
    cmd.opcode = direction == Direction::kLoad ? Opcode::kRead : Opcode::kWrite;
    cmd.device_offset = file_offset + p * config.page_size;
    cmd.length = config.page_size;
    cmd.buffer_offset = p * config.page_size;
    cmd.cid = static_cast<std::uint32_t>(p);
    per_queue[p % queue_count].push_back(cmd);
  }

  TransferReport report;
  report.queue_count = queue_count;
  report.per_queue_pages.assign(queue_count, 0);
  report.per_queue_rings.assign(queue_count, 0);
  report.bytes = real_bytes;

  for (std::uint32_t q = 0; q < queue_count; ++q) {
    QueuePair qp(config, q);
    const auto& cmds = per_queue[q];
    std::size_t done = 0;
    std::uint32_t chunk_index = 0;
    while (done < cmds.size()) {
      const std::size_t chunk =
          std::min<std::size_t>(cmds.size() - done, config.depth - 1);
      const SubmitReport sub =
          submit_batch(qp, store, buffer, std::span<const Command>(cmds).subspan(done, chunk),
                       strategy, workers_per_queue, derive_seed(seed, q, chunk_index));
      report.commands += sub.commands;
      report.batches += sub.batches;
      report.sq_rings += sub.sq_rings;
      report.cq_rings += sub.cq_rings;
      report.lock_events += sub.lock_events;
      report.per_queue_pages[q] += sub.commands;
      report.per_queue_rings[q] += sub.sq_rings + sub.cq_rings;
      done += chunk;
      ++chunk_index;
    }
  }
  return report;
}

double model_time(const TransferReport& report, const CostModel& cost) {
  if (cost.ring_latency_s <= 0 || cost.page_service_s <= 0) {
    throw std::invalid_argument("cost model parameters must be positive");
  }
  double worst = 0.0;
  for (std::uint32_t q = 0; q < report.queue_count; ++q) {
    const double t = static_cast<double>(report.per_queue_rings[q]) * cost.ring_latency_s +
                     static_cast<double>(report.per_queue_pages[q]) * cost.page_service_s;
    worst = std::max(worst, t);
  }
  return worst;
}

}  // namespace legend::nvme
