/*
   Copyright [2026] [IBM Corporation]
   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at
       http://www.apache.org/licenses/LICENSE-2.0
   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#ifndef MCASLITE_BENCH_BENCH_H
#define MCASLITE_BENCH_BENCH_H

#include <mcaslite/client/ring.h>
#include <mcaslite/status.h>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

/* Desk-scale benchmark harness: workload mixes, shard scaling, fairness and
   40-bin latency histograms. Clients run as threads or as separate processes
   coordinated over a loopback control socket. */
namespace mcaslite::bench
{
  using json = nlohmann::json;
  using client::endpoint;

  enum class mix { read, write, ado };

  std::string_view mix_name(mix m) noexcept;
  /* Throws error(E_INVALID) for an unknown name. */
  mix parse_mix(std::string_view name);

  struct workload
  {
    mix kind = mix::write;
    std::size_t key_len = 8;
    std::size_t value_len = 16;
    unsigned clients = 5;
    unsigned shards = 1;
    std::uint64_t seed = 1;
    /* Per client. A run stops at whichever limit is set; neither means no ops. */
    std::uint64_t ops = 0;
    double duration = 0;
    bool same_key = false;
    std::uint64_t key_set = 100000;
    std::uint64_t pool_size = 64 * MiB;
  };

  json to_json(const workload &w);
  workload workload_from_json(const json &j);

  /* The n-th key client c draws, for n < count. Identical for equal seeds. */
  std::vector<std::string> key_sequence(const workload &w, unsigned client, std::uint64_t count);

  class histogram
  {
  public:
    static constexpr unsigned bins = 40;

    /* Linear bins over [min, p99.99]; slower samples land in the overflow bin. */
    static histogram build(std::vector<std::uint64_t> samples);

    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    std::uint64_t width = 0;
    std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(bins);
    std::uint64_t overflow = 0;
    std::uint64_t samples = 0;
  };

  struct percentiles
  {
    std::uint64_t p50 = 0;
    std::uint64_t p90 = 0;
    std::uint64_t p99 = 0;
    std::uint64_t p999 = 0;
    std::uint64_t max = 0;
  };

  /* Nearest-rank percentiles of sorted latencies. */
  percentiles percentiles_of(const std::vector<std::uint64_t> &sorted);

  struct client_result
  {
    unsigned id = 0;
    unsigned shard = 0;
    std::uint64_t ops = 0;
    std::uint64_t errors = 0;
    double seconds = 0;
    std::string host;
    unsigned host_cpus = 0;
    std::string error;

    double ops_per_sec() const noexcept { return seconds > 0 ? double(ops) / seconds : 0; }
  };

  struct report
  {
    workload spec;
    std::vector<client_result> clients;
    double wall_seconds = 0;       /* longest client run */
    double aggregate = 0;          /* total ops / wall_seconds */
    histogram hist;
    percentiles latency;
    bool partial = false;

    json to_json() const;
    std::string clients_csv() const;
    std::string histogram_csv() const;
  };

  /* 1 - agg(n) / (n * agg(1)): shortfall against a linear projection of one shard. */
  double degradation(unsigned shards, double aggregate, double single_shard) noexcept;

  struct scaling_row
  {
    unsigned shards = 0;
    double aggregate = 0;
    double linear = 0;
    double degradation = 0;
  };

  std::vector<scaling_row> scaling_table(const std::vector<std::pair<unsigned, double>> &runs);
  std::string scaling_csv(const std::vector<scaling_row> &rows);

  struct fairness
  {
    std::vector<double> shares;    /* each client's fraction of all ops */
    double min_max_ratio = 0;
    double max_deviation = 0;      /* max |share * n - 1| */
  };

  fairness fairness_of(const report &r);

  /* Where clients run. processes re-executes exe as a worker per client. */
  struct launch
  {
    enum class how { threads, processes } kind = how::threads;
    std::string exe;
    std::vector<endpoint> targets;  /* client i talks to targets[i % size] */
  };

  report run(const workload &w, const launch &l);

  /* Entry point of a worker process; returns the exit code. */
  int worker_main(std::uint16_t control_port, unsigned id);

  /* Shards served from threads of this process over loopback, each on a
     mapped file in dir. ADO invocations go to an in-process passthru. */
  class local_cluster
  {
  public:
    local_cluster(unsigned shards, std::uint64_t capacity, std::string dir = {});
    ~local_cluster();
    local_cluster(const local_cluster &) = delete;
    local_cluster &operator=(const local_cluster &) = delete;

    std::vector<endpoint> endpoints() const;

  private:
    struct impl;
    std::unique_ptr<impl> _impl;
  };

  std::string gnuplot_histogram(const std::string &csv_file, const std::string &png_file);
  std::string gnuplot_scaling(const std::string &csv_file, const std::string &png_file);
}

#endif
