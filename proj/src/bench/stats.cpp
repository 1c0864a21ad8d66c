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

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace mcaslite::bench
{
  std::string_view mix_name(mix m_) noexcept
  {
    switch ( m_ )
    {
    case mix::read: return "read";
    case mix::write: return "write";
    case mix::ado: return "ado";
    }
    return "?";
  }

  mix parse_mix(std::string_view name_)
  {
    for ( auto m : {mix::read, mix::write, mix::ado} )
    {
      if ( mix_name(m) == name_ )
      {
        return m;
      }
    }
    throw error(status::E_INVALID, "unknown mix " + std::string(name_));
  }

  json to_json(const workload &w_)
  {
    return json{
      {"mix", mix_name(w_.kind)},
      {"key_len", w_.key_len},
      {"value_len", w_.value_len},
      {"clients", w_.clients},
      {"shards", w_.shards},
      {"seed", w_.seed},
      {"ops", w_.ops},
      {"duration", w_.duration},
      {"same_key", w_.same_key},
      {"key_set", w_.key_set},
      {"pool_size", w_.pool_size},
    };
  }

  workload workload_from_json(const json &j_)
  {
    workload w;
    w.kind = parse_mix(j_.at("mix").get<std::string>());
    w.key_len = j_.at("key_len");
    w.value_len = j_.at("value_len");
    w.clients = j_.at("clients");
    w.shards = j_.at("shards");
    w.seed = j_.at("seed");
    w.ops = j_.at("ops");
    w.duration = j_.at("duration");
    w.same_key = j_.at("same_key");
    w.key_set = j_.at("key_set");
    w.pool_size = j_.at("pool_size");
    return w;
  }

  histogram histogram::build(std::vector<std::uint64_t> samples_)
  {
    histogram h;
    h.samples = samples_.size();
    if ( samples_.empty() )
    {
      return h;
    }
    std::sort(samples_.begin(), samples_.end());
    auto rank = std::size_t(std::ceil(0.9999 * double(samples_.size())));
    h.lo = samples_.front();
    h.hi = samples_[std::max<std::size_t>(rank, 1) - 1];
    h.width = std::max<std::uint64_t>(1, (h.hi - h.lo + bins) / bins);
    for ( auto s : samples_ )
    {
      if ( s > h.hi )
      {
        ++h.overflow;
      }
      else
      {
        ++h.counts[std::min<std::uint64_t>((s - h.lo) / h.width, bins - 1)];
      }
    }
    return h;
  }

  percentiles percentiles_of(const std::vector<std::uint64_t> &sorted_)
  {
    percentiles p;
    if ( sorted_.empty() )
    {
      return p;
    }
    auto at = [&] (double q) {
      auto rank = std::size_t(std::ceil(q * double(sorted_.size())));
      return sorted_[std::clamp<std::size_t>(rank, 1, sorted_.size()) - 1];
    };
    p.p50 = at(0.50);
    p.p90 = at(0.90);
    p.p99 = at(0.99);
    p.p999 = at(0.999);
    p.max = sorted_.back();
    return p;
  }

  json report::to_json() const
  {
    json cl = json::array();
    for ( const auto &c : clients )
    {
      cl.push_back({
        {"id", c.id}, {"shard", c.shard}, {"ops", c.ops}, {"errors", c.errors},
        {"seconds", c.seconds}, {"ops_per_sec", c.ops_per_sec()},
        {"host", c.host}, {"host_cpus", c.host_cpus}, {"error", c.error},
      });
    }
    return json{
      {"workload", bench::to_json(spec)},
      {"clients", cl},
      {"wall_seconds", wall_seconds},
      {"aggregate_ops_per_sec", aggregate},
      {"partial", partial},
      {"latency_ns", {{"p50", latency.p50}, {"p90", latency.p90}, {"p99", latency.p99},
                      {"p99.9", latency.p999}, {"max", latency.max}}},
      {"histogram", {{"lo_ns", hist.lo}, {"hi_ns", hist.hi}, {"bin_width_ns", hist.width},
                     {"counts", hist.counts}, {"overflow", hist.overflow}, {"samples", hist.samples}}},
    };
  }

  std::string report::clients_csv() const
  {
    std::string out = "client,shard,ops,errors,seconds,ops_per_sec,host\n";
    for ( const auto &c : clients )
    {
      out += fmt::format("{},{},{},{},{:.6f},{:.1f},{}\n", c.id, c.shard, c.ops, c.errors, c.seconds, c.ops_per_sec(), c.host);
    }
    return out;
  }

  std::string report::histogram_csv() const
  {
    std::string out = "bin_start_us,bin_end_us,count\n";
    if ( hist.samples == 0 )
    {
      return out;
    }
    for ( unsigned i = 0; i != histogram::bins; ++i )
    {
      auto a = hist.lo + i * hist.width;
      out += fmt::format("{:.3f},{:.3f},{}\n", double(a) / 1000, double(a + hist.width) / 1000, hist.counts[i]);
    }
    auto a = hist.lo + histogram::bins * hist.width;
    out += fmt::format("{:.3f},inf,{}\n", double(a) / 1000, hist.overflow);
    return out;
  }

  double degradation(unsigned shards_, double aggregate_, double single_shard_) noexcept
  {
    if ( shards_ == 0 || single_shard_ <= 0 )
    {
      return 0;
    }
    return 1.0 - aggregate_ / (double(shards_) * single_shard_);
  }

  std::vector<scaling_row> scaling_table(const std::vector<std::pair<unsigned, double>> &runs_)
  {
    std::vector<scaling_row> rows;
    double one = 0;
    for ( const auto &[n, agg] : runs_ )
    {
      if ( n == 1 )
      {
        one = agg;
      }
    }
    for ( const auto &[n, agg] : runs_ )
    {
      rows.push_back({n, agg, double(n) * one, degradation(n, agg, one)});
    }
    std::sort(rows.begin(), rows.end(), [] (const auto &a, const auto &b) { return a.shards < b.shards; });
    return rows;
  }

  std::string scaling_csv(const std::vector<scaling_row> &rows_)
  {
    std::string out = "shards,aggregate_ops_per_sec,linear_ops_per_sec,degradation_pct\n";
    for ( const auto &r : rows_ )
    {
      out += fmt::format("{},{:.1f},{:.1f},{:.2f}\n", r.shards, r.aggregate, r.linear, 100 * r.degradation);
    }
    return out;
  }

  fairness fairness_of(const report &r_)
  {
    fairness f;
    std::uint64_t total = 0;
    for ( const auto &c : r_.clients )
    {
      total += c.ops;
    }
    if ( total == 0 || r_.clients.empty() )
    {
      return f;
    }
    double lo = 1, hi = 0;
    auto n = double(r_.clients.size());
    for ( const auto &c : r_.clients )
    {
      auto share = double(c.ops) / double(total);
      f.shares.push_back(share);
      lo = std::min(lo, share);
      hi = std::max(hi, share);
      f.max_deviation = std::max(f.max_deviation, std::abs(share * n - 1));
    }
    f.min_max_ratio = hi > 0 ? lo / hi : 0;
    return f;
  }

  std::string gnuplot_histogram(const std::string &csv_, const std::string &png_)
  {
    return fmt::format(
      "set terminal pngcairo size 900,500\n"
      "set output '{1}'\n"
      "set datafile separator ','\n"
      "set logscale y\n"
      "set xlabel 'latency (us)'\n"
      "set ylabel 'samples'\n"
      "set style fill solid 0.6\n"
      "set boxwidth 0.9 relative\n"
      "plot '{0}' every ::1 using (($1+$2)/2):3 with boxes notitle\n",
      csv_, png_);
  }

  std::string gnuplot_scaling(const std::string &csv_, const std::string &png_)
  {
    return fmt::format(
      "set terminal pngcairo size 900,500\n"
      "set output '{1}'\n"
      "set datafile separator ','\n"
      "set key top left\n"
      "set xlabel 'shards'\n"
      "set ylabel 'ops/sec'\n"
      "set y2label 'degradation (%)'\n"
      "set y2tics\n"
      "plot '{0}' every ::1 using 1:2 with linespoints title 'aggregate', \\\n"
      "     '{0}' every ::1 using 1:3 with lines dashtype 2 title 'linear', \\\n"
      "     '{0}' every ::1 using 1:4 axes x1y2 with linespoints title 'degradation'\n",
      csv_, png_);
  }
}
