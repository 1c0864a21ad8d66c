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

#include <mcaslite/pmem/backend.h>

#include "support/shard_harness.h"

#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include <filesystem>

using namespace mcaslite;
using namespace std::chrono;
using mcaslite::test::shard_harness;
using mcaslite::test::text;

/* Plugins run in a spawned mcas-ado that maps the pool's extents of the arena file. */
namespace
{
  class AdoProcess : public ::testing::Test
  {
  protected:
    void SetUp() override
    {
      spdlog::set_level(spdlog::level::err);
      _path = std::filesystem::temp_directory_path() /
              ("mcaslite-ado-" + std::to_string(::getpid()) + "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
      std::filesystem::remove(_path);
    }

    void TearDown() override
    {
      h.reset();
      std::filesystem::remove(_path);
    }

    void start(std::vector<std::string> plugins_, bool post_put_ = false, ado::plugin_params params_ = {})
    {
      server::shard_options o;
      o.mode = server::ado_mode::process;
      o.ado_exe = MCASLITE_ADO_EXE;
      o.ado_path = MCASLITE_ADO_DIR;
      o.label = "t" + std::to_string(::getpid());
      for ( auto &p : plugins_ )
      {
        o.ado_plugins.push_back("libcomponent-adoplugin-" + p + ".so");
      }
      o.signal_post_put = post_put_;
      o.ado_params = std::move(params_);
      h = std::make_unique<shard_harness>(std::make_shared<pmem::mapped_file_backend>(_path.string(), 256 * MiB), o);
      s = h->session();
      pool = h->create_pool(s, "proc");
    }

    std::filesystem::path _path;
    std::unique_ptr<shard_harness> h;
    server::session_id s = 0;
    engine::pool_t pool = 0;
  };
}

TEST_F(AdoProcess, PluginWritesThroughItsMappingAreVisibleToGet)
{
  start({"testkit"});
  auto r = h->invoke(s, pool, "k", "write:hello-from-ado;read", 32);
  ASSERT_EQ(r.st, status::S_OK);
  auto g = h->call(s, wire::get_request{false, pool, "k"});
  ASSERT_EQ(g.st, status::S_OK);
  EXPECT_EQ(g.value.str().substr(0, 14), "hello-from-ado");
  EXPECT_EQ(text(r.ado.at(1)), g.value.str());
}

TEST_F(AdoProcess, DescriptorsAgreeBetweenProcesses)
{
  start({"testkit"});
  ASSERT_EQ(h->put(s, pool, "other", "shard-written bytes"), status::S_OK);
  auto r = h->invoke(s, pool, "k", "open:other;read", 8);
  ASSERT_EQ(r.st, status::S_OK);
  engine::value_ref v;
  ASSERT_EQ(h->sh->store().get_value_ref(pool, as_bytes("other"), v), status::S_OK);
  EXPECT_EQ(text(r.ado.at(0)), std::to_string(v.offset) + ":" + std::to_string(v.length));
}

TEST_F(AdoProcess, PassthruEchoAcrossTheQueue)
{
  start({"passthru"});
  for ( std::size_t n : {std::size_t(1), std::size_t(4096), std::size_t(100000), std::size_t(1 * MiB)} )
  {
    byte_vector payload(n);
    for ( std::size_t i = 0; i != n; ++i )
    {
      payload[i] = std::byte(i * 13 + n);
    }
    auto r = h->call(s, wire::invoke_ado_request{pool, "k", 0, 8, wire::payload(payload)});
    ASSERT_EQ(r.st, status::S_OK) << n;
    ASSERT_EQ(r.ado.size(), 1u);
    EXPECT_EQ(r.ado[0].data, payload) << n;
  }
}

TEST_F(AdoProcess, RoundRobinOverTwoLoadedModules)
{
  start({"testkit", "testkit"});
  for ( unsigned i = 0; i != 20; ++i )
  {
    auto r = h->invoke(s, pool, "k", "whoami", 8);
    ASSERT_EQ(r.st, status::S_OK);
    EXPECT_EQ(r.ado.at(0).layer_id, i % 2);
    EXPECT_EQ(h->sh->lock_audit(), "");
  }
}

TEST_F(AdoProcess, AbortFaultsTheInvokeAndTheAdoIsRelaunched)
{
  start({"testkit"});
  ASSERT_EQ(h->put(s, pool, "k", "v"), status::S_OK);
  auto r = h->invoke(s, pool, "k", "create:side:16;abort");
  EXPECT_EQ(r.st, status::E_ADO_FAULT);
  EXPECT_EQ(h->sh->lock_audit(), "");
  EXPECT_EQ(h->put(s, pool, "k", "after"), status::S_OK);
  EXPECT_EQ(h->put(s, pool, "side", "free again"), status::S_OK);
  r = h->invoke(s, pool, "k", "echo:back");
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_EQ(text(r.ado.at(0)), "back");
}

TEST_F(AdoProcess, AnotherPoolsMemoryCannotBeMapped)
{
  start({"testkit"});
  auto b = h->create_pool(s, "neighbour");
  auto foreign = h->sh->store().pool_regions(b).at(0);
  ASSERT_EQ(h->put(s, pool, "k", "v"), status::S_OK);
  EXPECT_EQ(h->invoke(s, pool, "k", "map:" + std::to_string(foreign.offset) + ":4096").st, status::E_MAP_FAIL);
  auto own = h->sh->store().pool_regions(pool).at(0);
  EXPECT_EQ(h->invoke(s, pool, "k", "map:" + std::to_string(own.offset) + ":4096").st, status::S_OK);
}

TEST_F(AdoProcess, InvokeTargetIsWriteLockedWhileTheWorkRuns)
{
  start({"testkit"});
  ASSERT_EQ(h->put(s, pool, "k", "v"), status::S_OK);
  auto other = h->session();
  ASSERT_EQ(h->call(other, wire::open_pool_request{"proc"}).st, status::S_OK);
  auto rid = h->submit(s, wire::invoke_ado_request{pool, "k", 0, 0, wire::payload(std::string("sleep:300"))});
  while ( h->sh->works_in_flight() == 0 )
  {
    h->sh->poll();
  }
  EXPECT_EQ(h->call(other, wire::put_request{false, pool, 0, "k", wire::payload(std::string("x"))}).st, status::E_LOCKED);
  EXPECT_EQ(h->call(other, wire::get_request{false, pool, "k"}).st, status::E_LOCKED);
  EXPECT_EQ(h->call(other, wire::erase_request{pool, "k"}).st, status::E_LOCKED);
  /* unrelated keys are served while the work runs */
  EXPECT_EQ(h->call(other, wire::put_request{false, pool, 0, "free", wire::payload(std::string("x"))}).st, status::S_OK);
  EXPECT_EQ(h->call(other, wire::delete_pool_request{"proc"}).st, status::E_BUSY);
  EXPECT_EQ(h->wait(rid).st, status::S_OK);
  EXPECT_EQ(h->sh->lock_audit(), "");
  EXPECT_EQ(h->call(other, wire::put_request{false, pool, 0, "k", wire::payload(std::string("x"))}).st, status::S_OK);
}

TEST_F(AdoProcess, SessionRequestsQueueBehindItsPendingInvoke)
{
  start({"testkit"});
  std::vector<std::uint64_t> sent;
  sent.push_back(h->submit(s, wire::invoke_ado_request{pool, "a", 0, 8, wire::payload(std::string("sleep:100"))}));
  sent.push_back(h->submit(s, wire::put_request{false, pool, 0, "b", wire::payload(std::string("1"))}));
  sent.push_back(h->submit(s, wire::get_request{false, pool, "b"}));
  sent.push_back(h->submit(s, wire::invoke_ado_request{pool, "a", 0, 0, wire::payload(std::string("echo:z"))}));
  EXPECT_EQ(h->wait(sent.back()).st, status::S_OK);
  auto &got = h->order[s];
  ASSERT_GE(got.size(), sent.size());
  EXPECT_EQ(std::vector<std::uint64_t>(got.end() - 4, got.end()), sent);
}

TEST_F(AdoProcess, SignalStallIsVisibleInPutLatency)
{
  start({"testkit"}, true, {{"signal_sleep_ms", "50"}});
  /* first put also launches the ADO */
  ASSERT_EQ(h->put(s, pool, "warm", "v"), status::S_OK);
  for ( int i = 0; i != 5; ++i )
  {
    auto t0 = steady_clock::now();
    ASSERT_EQ(h->put(s, pool, "k", "v"), status::S_OK);
    auto ms = duration<double, std::milli>(steady_clock::now() - t0).count();
    EXPECT_GE(ms, 50.0);
    EXPECT_LE(ms, 60.0 + 100.0);
  }
  EXPECT_EQ(h->sh->lock_audit(), "");
}
