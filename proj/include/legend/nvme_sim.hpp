#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

namespace legend::nvme {

enum class Opcode { kRead, kWrite };

// One page-granular transfer command. device_offset addresses the backing
// store, buffer_offset the device-visible transfer buffer.
struct Command {
  Opcode opcode = Opcode::kRead;
  std::uint64_t device_offset = 0;
  std::uint32_t length = 0;
  std::uint64_t buffer_offset = 0;
  std::uint32_t cid = 0;
};

enum class EnqueueMode { kPerCommandAtomic, kBatchPrecomputed };
enum class DoorbellMode { kPerCommand, kFullCoalesced };
enum class PollingMode { kPerThread, kBatchCounter };

struct AccessStrategy {
  EnqueueMode enqueue = EnqueueMode::kBatchPrecomputed;
  DoorbellMode doorbell = DoorbellMode::kFullCoalesced;
  PollingMode polling = PollingMode::kBatchCounter;
};

struct QueueConfig {
  std::uint32_t depth = 1024;
  std::uint32_t page_size = 4096;
};

// Backing store for a simulated device: a plain file region held open for
// the object's lifetime. Reads past the end of the region return zero bytes
// (the page padding of partial partitions); writes never extend the file past
// its logical size.
class BackingFile {
 public:
  BackingFile(std::filesystem::path path, std::uint64_t size_bytes);

  void read(std::uint64_t offset, std::span<std::byte> out) const;
  void write(std::uint64_t offset, std::span<const std::byte> data);

  std::uint64_t size() const { return size_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::uint64_t size_ = 0;
  mutable std::fstream stream_;
};

// Witness of one enqueue round: the SQ slots the workers claimed.
struct BatchTrace {
  std::uint32_t tail_old = 0;
  std::vector<std::uint32_t> slots;
};

struct SubmitReport {
  std::uint64_t commands = 0;
  std::uint64_t batches = 0;
  std::uint64_t sq_rings = 0;
  std::uint64_t cq_rings = 0;
  std::uint64_t lock_events = 0;
  std::uint64_t submitted = 0;
  std::uint64_t completed = 0;
  std::vector<BatchTrace> traces;

  void merge(const SubmitReport& other);
};

// Simulated submission/completion queue pair. Single-threaded and
// deterministic; worker concurrency is modeled by a seeded permutation of
// per-worker step order within each round.
class QueuePair {
 public:
  QueuePair(QueueConfig config, std::uint32_t id);

  std::uint32_t free_slots() const;
  std::uint32_t depth() const { return config_.depth; }
  std::uint32_t id() const { return id_; }

  const QueueConfig& config() const { return config_; }

  // Counter state accumulated over the queue's lifetime.
  std::uint64_t sq_doorbell_writes = 0;
  std::uint64_t cq_doorbell_writes = 0;
  std::uint64_t poll_counter = 0;

  std::uint32_t sq_tail = 0;
  std::uint32_t sq_head = 0;
  std::uint32_t cq_tail = 0;
  std::uint32_t cq_head = 0;

 private:
  QueueConfig config_;
  std::uint32_t id_ = 0;
};

// Enqueues, executes and completes a list of commands against the backing
// store, in rounds of `workers` commands. Throws when the batch exceeds the
// free SQ slots or a command is not page-aligned.
SubmitReport submit_batch(QueuePair& qp, BackingFile& store, std::span<std::byte> buffer,
                          std::span<const Command> commands, const AccessStrategy& strategy,
                          std::uint32_t workers, std::uint64_t seed);

enum class Direction { kLoad, kOffload };

struct TransferReport {
  std::uint64_t commands = 0;
  std::uint64_t batches = 0;
  std::uint64_t sq_rings = 0;
  std::uint64_t cq_rings = 0;
  std::uint64_t lock_events = 0;
  std::uint64_t bytes = 0;
  std::uint32_t queue_count = 0;
  std::vector<std::uint64_t> per_queue_pages;
  std::vector<std::uint64_t> per_queue_rings;
};

// Moves one partition-sized region between the backing file and the transfer
// buffer as a single run of page commands striped round-robin over
// queue_count queue pairs. real_bytes need not be page-aligned; the tail page
// is padded in the buffer and the pad never reaches the file.
TransferReport transfer_partition(BackingFile& store, std::uint64_t file_offset,
                                  std::uint64_t real_bytes, Direction direction,
                                  std::span<std::byte> buffer, const AccessStrategy& strategy,
                                  const QueueConfig& config, std::uint32_t queue_count,
                                  std::uint32_t workers_per_queue, std::uint64_t seed);

struct CostModel {
  double ring_latency_s = 1.0e-6;
  // Per-page service time of one queue; defaults calibrated so an 8-queue
  // read models 3.06 GB/s aggregate.
  double page_service_s = 9.90e-6;
};

// Modeled wall time of a transfer: slowest queue's rings plus page service.
double model_time(const TransferReport& report, const CostModel& cost);

}  // namespace legend::nvme
