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

#include <mcaslite/bench/bench.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace mcaslite;
using namespace mcaslite::bench;

namespace
{
  struct options
  {
    workload w;
    std::string mix = "write";
    std::string out = "report.json";
    std::string host = "127.0.0.1";
    std::vector<std::uint16_t> ports;
    std::string dir;
    bool threads = false;
    bool sweep = false;
    bool fair = false;
  };

  void write_file(const std::filesystem::path &p_, const std::string &text_)
  {
    std::ofstream f(p_);
    f << text_;
    if ( ! f )
    {
      throw error(status::E_INVALID, "cannot write " + p_.string());
    }
  }

  /* Sidecar files share the report's stem: <stem>.<what>.csv and .gp */
  std::filesystem::path sidecar(const options &o_, const std::string &what_)
  {
    auto p = std::filesystem::path(o_.out);
    return p.parent_path() / (p.stem().string() + "." + what_);
  }

  report run_once(const options &o_, const workload &w_)
  {
    launch l;
    if ( ! o_.threads )
    {
      l.kind = launch::how::processes;
      l.exe = std::filesystem::canonical("/proc/self/exe").string();
    }
    std::unique_ptr<local_cluster> cluster;
    if ( o_.ports.empty() )
    {
      auto per_shard = (w_.clients + w_.shards - 1) / std::max(1u, w_.shards);
      auto capacity = (w_.pool_size * per_shard + 64 * MiB + 32 * MiB - 1) / (32 * MiB) * (32 * MiB);
      cluster = std::make_unique<local_cluster>(w_.shards, std::max<std::uint64_t>(capacity, 128 * MiB), o_.dir);
      l.targets = cluster->endpoints();
    }
    else
    {
      if ( o_.ports.size() < w_.shards )
      {
        throw error(status::E_INVALID, fmt::format("{} shards requested, {} ports given", w_.shards, o_.ports.size()));
      }
      for ( unsigned i = 0; i != w_.shards; ++i )
      {
        l.targets.push_back({o_.host, o_.ports[i]});
      }
    }
    return run(w_, l);
  }

  void summarize(const report &r_)
  {
    fmt::print("{} clients on {} shards: {:.0f} ops/sec aggregate over {:.2f} s{}\n", r_.clients.size(), r_.spec.shards,
               r_.aggregate, r_.wall_seconds, r_.partial ? " (partial)" : "");
    for ( const auto &c : r_.clients )
    {
      fmt::print("  client {} shard {}: {} ops, {} errors, {:.0f} ops/sec{}\n", c.id, c.shard, c.ops, c.errors,
                 c.ops_per_sec(), c.error.empty() ? "" : " [" + c.error + "]");
    }
    fmt::print("  latency us: p50 {:.2f} p90 {:.2f} p99 {:.2f} p99.9 {:.2f} max {:.2f}\n", r_.latency.p50 / 1e3,
               r_.latency.p90 / 1e3, r_.latency.p99 / 1e3, r_.latency.p999 / 1e3, r_.latency.max / 1e3);
  }

  int single(const options &o_)
  {
    auto r = run_once(o_, o_.w);
    summarize(r);
    auto hist_csv = sidecar(o_, "hist.csv");
    write_file(o_.out, r.to_json().dump(2) + "\n");
    write_file(sidecar(o_, "clients.csv"), r.clients_csv());
    write_file(hist_csv, r.histogram_csv());
    write_file(sidecar(o_, "hist.gp"), gnuplot_histogram(hist_csv.string(), sidecar(o_, "hist.png").string()));
    return r.partial ? 1 : 0;
  }

  int scaling(const options &o_)
  {
    json runs = json::array();
    std::vector<std::pair<unsigned, double>> points;
    bool partial = false;
    for ( unsigned n = 1; n <= o_.w.shards; ++n )
    {
      auto w = o_.w;
      w.shards = n;
      w.clients = o_.w.clients * n;
      auto r = run_once(o_, w);
      summarize(r);
      partial = partial || r.partial;
      points.emplace_back(n, r.aggregate);
      runs.push_back(r.to_json());
    }
    auto rows = scaling_table(points);
    fmt::print("{:>6} {:>14} {:>14} {:>12}\n", "shards", "ops/sec", "linear", "degradation");
    json table = json::array();
    for ( const auto &row : rows )
    {
      fmt::print("{:>6} {:>14.0f} {:>14.0f} {:>11.1f}%\n", row.shards, row.aggregate, row.linear, 100 * row.degradation);
      table.push_back({{"shards", row.shards}, {"aggregate_ops_per_sec", row.aggregate},
                       {"linear_ops_per_sec", row.linear}, {"degradation", row.degradation}});
    }
    auto csv = sidecar(o_, "scaling.csv");
    write_file(o_.out, json{{"mode", "scaling"}, {"table", table}, {"runs", runs}}.dump(2) + "\n");
    write_file(csv, scaling_csv(rows));
    write_file(sidecar(o_, "scaling.gp"), gnuplot_scaling(csv.string(), sidecar(o_, "scaling.png").string()));
    return partial ? 1 : 0;
  }

  int fairness_sweep(const options &o_)
  {
    json runs = json::array();
    std::string csv = "clients,min_max_ratio,max_deviation_pct,shares\n";
    bool partial = false;
    for ( unsigned c = 1; c <= o_.w.clients; ++c )
    {
      auto w = o_.w;
      w.shards = 1;
      w.clients = c;
      auto r = run_once(o_, w);
      partial = partial || r.partial;
      auto f = fairness_of(r);
      std::string shares;
      for ( auto s : f.shares )
      {
        shares += fmt::format("{}{:.4f}", shares.empty() ? "" : " ", s);
      }
      fmt::print("{} clients: min/max {:.3f}, worst deviation from 1/{} {:.1f}%, shares {}\n", c, f.min_max_ratio, c,
                 100 * f.max_deviation, shares);
      csv += fmt::format("{},{:.4f},{:.2f},{}\n", c, f.min_max_ratio, 100 * f.max_deviation, shares);
      runs.push_back({{"clients", c}, {"shares", f.shares}, {"min_max_ratio", f.min_max_ratio},
                      {"max_deviation", f.max_deviation}, {"report", r.to_json()}});
    }
    write_file(o_.out, json{{"mode", "fairness"}, {"runs", runs}}.dump(2) + "\n");
    write_file(sidecar(o_, "fairness.csv"), csv);
    return partial ? 1 : 0;
  }
}

int main(int argc, char **argv)
{
  options o;
  std::uint16_t control = 0;
  unsigned worker_id = 0;
  bool worker = false;

  CLI::App app{"mcas-bench: workload, scaling and fairness benchmarks"};
  app.add_option("--mix", o.mix, "read, write or ado")->check(CLI::IsMember({"read", "write", "ado"}));
  app.add_option("--key", o.w.key_len, "Key length in bytes")->check(CLI::PositiveNumber);
  app.add_option("--value", o.w.value_len, "Value length in bytes")->check(CLI::PositiveNumber);
  app.add_option("--clients", o.w.clients, "Clients (per shard with --sweep, maximum with --fairness)");
  app.add_option("--shards", o.w.shards, "Shards (maximum with --sweep)")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.w.seed, "Workload seed");
  app.add_option("--ops", o.w.ops, "Operations per client");
  app.add_option("--duration", o.w.duration, "Seconds per client when --ops is not given")->check(CLI::NonNegativeNumber);
  app.add_flag("--same-key", o.w.same_key, "Every op targets one key");
  app.add_option("--key-set", o.w.key_set, "Keys per client")->check(CLI::PositiveNumber);
  app.add_option("--pool-size", o.w.pool_size, "Pool bytes per client");
  app.add_option("--out", o.out, "Report file; CSV and gnuplot sidecars share its stem");
  app.add_option("--host", o.host, "Server host when --ports is given");
  app.add_option("--ports", o.ports, "Shard ports of a running server; otherwise shards run locally")->delimiter(',');
  app.add_option("--dir", o.dir, "Directory for local shard arena files");
  app.add_flag("--threads", o.threads, "Run clients as threads instead of processes");
  auto *sw = app.add_flag("--sweep", o.sweep, "Shard scaling sweep 1..shards");
  app.add_flag("--fairness", o.fair, "Fairness sweep 1..clients on one shard")->excludes(sw);
  app.add_flag("--worker", worker)->group("");
  app.add_option("--control", control)->group("");
  app.add_option("--id", worker_id)->group("");
  o.w.duration = 5;
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::warn);
  if ( worker )
  {
    return worker_main(control, worker_id);
  }
  if ( app.count("--ops") && ! app.count("--duration") )
  {
    o.w.duration = 0;
  }
  if ( o.fair && o.w.ops )
  {
    std::cerr << "--fairness measures shares of a fixed duration; drop --ops" << std::endl;
    return 2;
  }
  if ( o.fair && ! app.count("--clients") )
  {
    o.w.clients = 8;
  }
  if ( (o.sweep || o.fair) && ! app.count("--duration") && ! o.w.ops )
  {
    o.w.duration = 2;
  }
  o.w.kind = parse_mix(o.mix);
  try
  {
    return o.sweep ? scaling(o) : o.fair ? fairness_sweep(o) : single(o);
  }
  catch ( const error &e )
  {
    std::cerr << e.what() << std::endl;
    return 1;
  }
}
