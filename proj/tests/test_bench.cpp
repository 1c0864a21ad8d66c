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

#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include <numeric>

using namespace mcaslite;
using namespace mcaslite::bench;

TEST(Histogram, UniformSamplesFillEqualBins)
{
  std::vector<std::uint64_t> s(1000);
  std::iota(s.begin(), s.end(), 0);
  std::shuffle(s.begin(), s.end(), std::mt19937_64(1));
  auto h = histogram::build(s);
  EXPECT_EQ(h.counts.size(), 40u);
  EXPECT_EQ(h.lo, 0u);
  EXPECT_EQ(h.hi, 999u);
  EXPECT_EQ(h.width, 25u);
  for ( auto c : h.counts )
  {
    EXPECT_EQ(c, 25u);
  }
  EXPECT_EQ(h.overflow, 0u);
}

TEST(Histogram, TailBeyondP9999GoesToOverflow)
{
  std::vector<std::uint64_t> s(100000, 10);
  for ( std::size_t i = 0; i != 5; ++i )
  {
    s[i] = 1000000 + i;
  }
  auto h = histogram::build(s);
  EXPECT_EQ(h.hi, 10u);
  EXPECT_EQ(h.overflow, 5u);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t(0)) + h.overflow, h.samples);
}

TEST(Histogram, CountsSumToSamplesForRandomLatencies)
{
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> lat(10, 1);
  std::vector<std::uint64_t> s(200000);
  for ( auto &x : s )
  {
    x = std::uint64_t(lat(rng));
  }
  auto h = histogram::build(s);
  std::uint64_t below = 0;
  for ( unsigned i = 0; i != histogram::bins; ++i )
  {
    std::uint64_t expect = std::count_if(s.begin(), s.end(), [&] (std::uint64_t x) {
      return x <= h.hi && x >= h.lo + i * h.width && x < h.lo + (i + 1) * h.width;
    });
    EXPECT_EQ(h.counts[i], expect) << i;
    below += expect;
  }
  EXPECT_EQ(below + h.overflow, s.size());
  EXPECT_LE(h.overflow, s.size() / 10000 + 1);
}

TEST(Histogram, EmptyInput)
{
  auto h = histogram::build({});
  EXPECT_EQ(h.samples, 0u);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t(0)), 0u);
}

TEST(Percentiles, NearestRank)
{
  std::vector<std::uint64_t> s(100);
  std::iota(s.begin(), s.end(), 1);
  auto p = percentiles_of(s);
  EXPECT_EQ(p.p50, 50u);
  EXPECT_EQ(p.p90, 90u);
  EXPECT_EQ(p.p99, 99u);
  EXPECT_EQ(p.p999, 100u);
  EXPECT_EQ(p.max, 100u);
}

TEST(Scaling, DegradationFromLinearProjection)
{
  EXPECT_DOUBLE_EQ(degradation(1, 100, 100), 0.0);
  EXPECT_DOUBLE_EQ(degradation(2, 150, 100), 0.25);
  EXPECT_DOUBLE_EQ(degradation(4, 400, 100), 0.0);
  auto rows = scaling_table({{3, 240}, {1, 100}, {2, 190}});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].shards, 1u);
  EXPECT_DOUBLE_EQ(rows[0].degradation, 0.0);
  EXPECT_DOUBLE_EQ(rows[1].linear, 200.0);
  EXPECT_NEAR(rows[1].degradation, 0.05, 1e-12);
  EXPECT_NEAR(rows[2].degradation, 0.2, 1e-12);
  EXPECT_NE(scaling_csv(rows).find("degradation"), std::string::npos);
}

TEST(Fairness, SharesAndRatio)
{
  report r;
  for ( unsigned i = 0; i != 4; ++i )
  {
    client_result c;
    c.ops = i == 3 ? 200 : 100;
    r.clients.push_back(c);
  }
  auto f = fairness_of(r);
  ASSERT_EQ(f.shares.size(), 4u);
  EXPECT_DOUBLE_EQ(f.shares[3], 0.4);
  EXPECT_DOUBLE_EQ(f.min_max_ratio, 0.5);
  EXPECT_DOUBLE_EQ(f.max_deviation, 0.6);
}

TEST(Workload, KeySequencesFollowTheSeed)
{
  workload w;
  w.key_len = 8;
  auto a = key_sequence(w, 0, 1000);
  EXPECT_EQ(a, key_sequence(w, 0, 1000));
  EXPECT_NE(a, key_sequence(w, 1, 1000));
  for ( const auto &k : a )
  {
    EXPECT_EQ(k.size(), 8u);
  }
  w.seed = 2;
  EXPECT_NE(a, key_sequence(w, 0, 1000));
  EXPECT_EQ(workload_from_json(to_json(w)).seed, 2u);
  EXPECT_THROW(parse_mix("scan"), error);
}

class BenchRun : public ::testing::Test
{
protected:
  static void SetUpTestSuite() { spdlog::set_level(spdlog::level::err); }

  launch threads_on(const local_cluster &c)
  {
    launch l;
    l.targets = c.endpoints();
    return l;
  }
};

TEST_F(BenchRun, ZeroDurationIsEmpty)
{
  local_cluster c(1, 512 * MiB);
  workload w;
  w.duration = 0;
  auto r = run(w, threads_on(c));
  EXPECT_EQ(r.clients.size(), 5u);
  EXPECT_EQ(r.aggregate, 0.0);
  EXPECT_EQ(r.hist.samples, 0u);
  EXPECT_FALSE(r.partial);
}

TEST_F(BenchRun, FiveWritersReportPerClientRatesAndAggregate)
{
  local_cluster c(1, 512 * MiB);
  workload w;
  w.ops = 400;
  auto r = run(w, threads_on(c));
  ASSERT_EQ(r.clients.size(), 5u);
  std::uint64_t total = 0;
  for ( const auto &cl : r.clients )
  {
    EXPECT_EQ(cl.ops, 400u);
    EXPECT_EQ(cl.errors, 0u);
    EXPECT_GT(cl.ops_per_sec(), 0.0);
    total += cl.ops;
  }
  EXPECT_NEAR(r.aggregate, double(total) / r.wall_seconds, 0.01 * r.aggregate);
  EXPECT_EQ(r.hist.samples, total);
  auto j = r.to_json();
  EXPECT_EQ(j["clients"].size(), 5u);
  EXPECT_EQ(j["histogram"]["counts"].size(), 40u);
}

TEST_F(BenchRun, SameKeyPassthruInvokesEcho)
{
  local_cluster c(1, 256 * MiB);
  workload w;
  w.kind = mix::ado;
  w.same_key = true;
  w.clients = 2;
  w.ops = 300;
  w.value_len = 64;
  auto r = run(w, threads_on(c));
  for ( const auto &cl : r.clients )
  {
    EXPECT_EQ(cl.ops, 300u);
    EXPECT_EQ(cl.errors, 0u);
  }
}

TEST_F(BenchRun, ReadsVerifyLength)
{
  local_cluster c(2, 256 * MiB);
  workload w;
  w.kind = mix::read;
  w.clients = 2;
  w.shards = 2;
  w.ops = 300;
  w.key_set = 50;
  auto r = run(w, threads_on(c));
  EXPECT_EQ(r.clients[0].shard, 0u);
  EXPECT_EQ(r.clients[1].shard, 1u);
  for ( const auto &cl : r.clients )
  {
    EXPECT_EQ(cl.errors, 0u);
  }
}

TEST_F(BenchRun, WorkerProcessesReportBack)
{
  local_cluster c(1, 256 * MiB);
  launch l;
  l.kind = launch::how::processes;
  l.exe = MCASLITE_BENCH_EXE;
  l.targets = c.endpoints();
  workload w;
  w.clients = 3;
  w.ops = 200;
  auto r = run(w, l);
  ASSERT_EQ(r.clients.size(), 3u);
  EXPECT_FALSE(r.partial);
  for ( const auto &cl : r.clients )
  {
    EXPECT_EQ(cl.ops, 200u);
    EXPECT_FALSE(cl.host.empty());
  }
  EXPECT_EQ(r.hist.samples, 600u);
}

TEST_F(BenchRun, UnreachableServerGivesPartialReport)
{
  launch l;
  l.targets = {{"127.0.0.1", 1}};
  workload w;
  w.clients = 2;
  w.ops = 10;
  auto r = run(w, l);
  EXPECT_TRUE(r.partial);
  for ( const auto &cl : r.clients )
  {
    EXPECT_NE(cl.error.find("E_CONNECT"), std::string::npos) << cl.error;
  }
}
