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

#include <mcaslite/ado/host.h>
#include <mcaslite/ado/ipc.h>
#include <mcaslite/ado/uipc.h>
#include <mcaslite/pmem/backend.h>

#include "support/shard_harness.h"

#include <gtest/gtest.h>
#include <spdlog/spdlog.h>

#include <random>
#include <thread>

using namespace mcaslite;
using namespace std::chrono;
using mcaslite::test::shard_harness;
using mcaslite::test::text;

namespace
{
  byte_vector numbered(std::uint64_t n_, std::size_t len_)
  {
    byte_vector v(std::max<std::size_t>(len_, 8));
    store_le(v.data(), n_);
    for ( std::size_t i = 8; i < v.size(); ++i )
    {
      v[i] = std::byte(n_ + i);
    }
    return v;
  }

  bool check_numbered(const byte_vector &v_, std::uint64_t n_)
  {
    return v_ == numbered(n_, v_.size());
  }

  std::vector<std::uint64_t> fields(const std::string &s_)
  {
    std::vector<std::uint64_t> v;
    std::size_t at = 0;
    while ( at <= s_.size() )
    {
      auto end = std::min(s_.find(':', at), s_.size());
      v.push_back(std::stoull(s_.substr(at, end - at)));
      at = end + 1;
    }
    return v;
  }

  std::shared_ptr<pmem::backend> memory(std::uint64_t cap_ = 256 * MiB)
  {
    return std::make_shared<pmem::crash_sim_backend>(cap_);
  }
}

/* ---- shared-memory queue ---- */

TEST(Uipc, TenThousandMessagesArriveInOrder)
{
  auto r = ado::uipc_region::create_local();
  ado::uipc_endpoint shard(*r, 0), ado(*r, 1);
  std::uint64_t sent = 0, received = 0;
  byte_vector m;
  while ( received != 10000 )
  {
    while ( sent != 10000 && shard.send(numbered(sent, 8 + sent % 300)) == status::S_OK )
    {
      ++sent;
    }
    while ( ado.recv(m) )
    {
      ASSERT_TRUE(check_numbered(m, received)) << received;
      ++received;
    }
  }
  EXPECT_FALSE(ado.recv(m));
}

TEST(Uipc, ConcurrentProducerConsumerLosesNothing)
{
  constexpr std::uint64_t n = 50000;
  auto r = ado::uipc_region::create_local(ado::ring_geometry{64, 4096, 4 * MiB});
  ado::uipc_endpoint shard(*r, 0), ado(*r, 1);
  std::thread producer([&] {
    std::mt19937_64 rng(7);
    for ( std::uint64_t i = 0; i != n; ++i )
    {
      /* every 64th message spills past the slot */
      auto len = i % 64 == 0 ? 8192 + rng() % 60000 : rng() % 4000;
      auto msg = numbered(i, len);
      while ( shard.send(msg) != status::S_OK )
      {
        std::this_thread::yield();
      }
    }
  });
  std::uint64_t next = 0;
  std::uint64_t bad = 0;
  byte_vector m;
  while ( next != n )
  {
    if ( ! ado.recv(m) )
    {
      std::this_thread::yield();
      continue;
    }
    if ( load_le<std::uint64_t>(m.data()) != next || ! check_numbered(m, next) )
    {
      ++bad;
    }
    ++next;
  }
  producer.join();
  EXPECT_EQ(bad, 0u);
  EXPECT_FALSE(ado.recv(m));
}

TEST(Uipc, MessageLargerThanSlotIsRefusedByTheRing)
{
  auto r = ado::uipc_region::create_local();
  ado::spsc_ring ring(*r, 0);
  byte_vector big(ring.slot_payload() + 1);
  EXPECT_EQ(ring.send(big), status::E_QUEUE_FULL);
  byte_vector fits(ring.slot_payload());
  EXPECT_EQ(ring.send(fits), status::S_OK);
}

TEST(Uipc, FullRingReportsQueueFull)
{
  auto r = ado::uipc_region::create_local();
  ado::uipc_endpoint shard(*r, 0);
  for ( unsigned i = 0; i != r->geometry().slots; ++i )
  {
    ASSERT_EQ(shard.send(numbered(i, 16)), status::S_OK);
  }
  EXPECT_EQ(shard.send(numbered(99, 16)), status::E_QUEUE_FULL);
  byte_vector over(r->geometry().spill_size + 1);
  EXPECT_EQ(shard.send(over), status::E_TOO_LARGE);
}

TEST(Uipc, NamedSegmentIsSharedBetweenMappings)
{
  auto name = "mcaslite.test." + std::to_string(::getpid()) + ".0.uipc";
  auto owner = ado::uipc_region::create_shm(name);
  auto other = ado::uipc_region::open_shm(name);
  ado::uipc_endpoint a(*owner, 0), b(*other, 1);
  ASSERT_EQ(a.send(numbered(1, 100)), status::S_OK);
  ASSERT_EQ(b.send(numbered(2, 10000)), status::S_OK);
  byte_vector m;
  ASSERT_TRUE(b.recv(m));
  EXPECT_TRUE(check_numbered(m, 1));
  ASSERT_TRUE(a.recv(m));
  EXPECT_TRUE(check_numbered(m, 2));
  EXPECT_THROW(ado::uipc_region::open_shm(name + ".missing"), error);
}

/* ---- queue messages ---- */

TEST(Ipc, EveryMessageKindRoundTrips)
{
  std::vector<ado::ipc_message> all;
  all.push_back(ado::work_request{7, "key", {{4096, 64}, {8192, 8}}, ado::value_desc{12288, 100}, to_bytes("req"), true});
  for ( int k = 1; k <= 11; ++k )
  {
    all.push_back(ado::callback_request{7, ado::callback_kind(k), "k" + std::to_string(k), 1u + k, 2u + k, 2});
  }
  all.push_back(ado::callback_reply{7, status::E_LOCKED, {{"a", {1, 2}}, {"b", {3, 4}}}, "x", 1, 2, 3});
  all.push_back(ado::work_complete{7, status::S_OK, {{0, to_bytes("r0")}, {1, to_bytes("r1")}}});
  all.push_back(ado::cluster_notice{"node", "join", "hello"});
  all.push_back(ado::shutdown_notice{});
  all.push_back(ado::ready_notice{status::E_CONFIG});
  for ( const auto &m : all )
  {
    auto bytes = ado::encode(m);
    ado::ipc_message back;
    ASSERT_EQ(ado::decode(bytes, back), status::S_OK);
    EXPECT_EQ(back, m);
    /* every strict prefix is rejected */
    for ( std::size_t cut = 0; cut < bytes.size(); cut += 1 + bytes.size() / 16 )
    {
      EXPECT_EQ(ado::decode(byte_span(bytes.data(), cut), back), status::E_PROTOCOL);
    }
  }
}

/* ---- plugin registry ---- */

TEST(Registry, ShortNamesAndLookup)
{
  plugins::register_builtins();
  EXPECT_EQ(ado::plugin_short_name("libcomponent-adoplugin-passthru.so"), "passthru");
  EXPECT_EQ(ado::plugin_short_name("testkit"), "testkit");
  EXPECT_TRUE(ado::load_plugin("passthru", "", {}));
  EXPECT_TRUE(ado::load_plugin("libcomponent-adoplugin-versioning.so", "/nonexistent", {}));
  try
  {
    ado::load_plugin("nosuchplugin", "", {});
    FAIL();
  }
  catch ( const error &e )
  {
    EXPECT_EQ(e.code(), status::E_CONFIG);
  }
}

TEST(Registry, LoadsSharedObjectFromAdoPath)
{
  auto p = ado::load_plugin("libcomponent-adoplugin-passthru.so", MCASLITE_ADO_DIR, {});
  ASSERT_TRUE(p);
}

/* ---- dispatch through the shard (plugins hosted in-process) ---- */

TEST(AdoDispatch, TwoPluginsAlternateStrictlyOverHundredInvokes)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit", "testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "rr");
  std::string names[2];
  for ( unsigned i = 0; i != 100; ++i )
  {
    auto r = h.invoke(s, p, "target", "whoami", 64);
    ASSERT_EQ(r.st, status::S_OK);
    ASSERT_EQ(r.ado.size(), 1u);
    EXPECT_EQ(r.ado[0].layer_id, i % 2) << "invoke " << i;
    auto &expect = names[i % 2];
    if ( i < 2 )
    {
      expect = text(r.ado[0]);
    }
    EXPECT_EQ(text(r.ado[0]), expect) << "invoke " << i;
    EXPECT_EQ(h.sh->lock_audit(), "");
  }
  EXPECT_NE(names[0], names[1]);
}

TEST(AdoDispatch, KeysCreatedByPluginAreUnlockedAtCompletion)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "deferred");
  auto r = h.invoke(s, p, "target", "create:k2:64;open:k3", 64);
  EXPECT_EQ(r.st, status::E_KEY_NOT_FOUND);
  EXPECT_EQ(h.sh->lock_audit(), "");
  EXPECT_TRUE(h.sh->store().locks().empty());

  r = h.invoke(s, p, "target", "create:k2:64;create:k3:32;unlock:k3");
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_EQ(h.sh->lock_audit(), "");
  EXPECT_TRUE(h.sh->store().locks().empty());
  EXPECT_EQ(h.put(s, p, "k2", "v"), status::S_OK);
  EXPECT_EQ(h.put(s, p, "k3", "v"), status::S_OK);
  EXPECT_EQ(h.put(s, p, "target", "v"), status::S_OK);

  /* the invoke target cannot be unlocked early */
  r = h.invoke(s, p, "target", "unlock:target");
  EXPECT_EQ(r.st, status::E_INVALID);
  EXPECT_EQ(h.sh->lock_audit(), "");
}

TEST(AdoDispatch, PassthruEchoesPayloadsFromOneByteToOneMebibyte)
{
  shard_harness h(memory(), shard_harness::in_process({"passthru"}));
  auto s = h.session();
  auto p = h.create_pool(s, "echo");
  std::mt19937_64 rng(3);
  std::vector<std::size_t> sizes;
  for ( std::size_t n = 1; n <= 1 * MiB; n *= 2 )
  {
    sizes.push_back(n);
    sizes.push_back(n + 1 + rng() % n);
  }
  sizes.back() = 1 * MiB;
  for ( auto n : sizes )
  {
    byte_vector payload(n);
    for ( auto &b : payload )
    {
      b = std::byte(rng());
    }
    auto r = h.call(s, wire::invoke_ado_request{p, "k", 0, 8, wire::payload(payload)});
    ASSERT_EQ(r.st, status::S_OK) << n;
    ASSERT_EQ(r.ado.size(), 1u);
    EXPECT_EQ(r.ado[0].data, payload) << n;
  }
  EXPECT_EQ(h.sh->lock_audit(), "");
}

TEST(AdoDispatch, PluginExceptionFaultsTheInvokeAndReleasesTheLock)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "fault");
  ASSERT_EQ(h.put(s, p, "k", "before"), status::S_OK);
  auto r = h.invoke(s, p, "k", "create:other:16;throw");
  EXPECT_EQ(r.st, status::E_ADO_FAULT);
  EXPECT_EQ(h.sh->lock_audit(), "");
  EXPECT_EQ(h.put(s, p, "k", "after"), status::S_OK);
  EXPECT_EQ(h.put(s, p, "other", "x"), status::S_OK);
  r = h.invoke(s, p, "k", "echo:fine");
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_EQ(text(r.ado.at(0)), "fine");
}

TEST(AdoDispatch, InvokeOnAbsentKeyNeedsValueSize)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "root");
  EXPECT_EQ(h.invoke(s, p, "absent", "echo").st, status::E_KEY_NOT_FOUND);
  auto r = h.invoke(s, p, "fresh", "read", 64);
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_EQ(r.ado.at(0).data, byte_vector(64));
  r = h.call(s, wire::get_attributes_request{p, "fresh", wire::attribute::value_length});
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_EQ(r.values, std::vector<std::uint64_t>{64});
}

TEST(AdoDispatch, WithoutPluginsInvokeIsNotSupported)
{
  shard_harness h(memory());
  auto s = h.session();
  auto p = h.create_pool(s, "none");
  EXPECT_EQ(h.invoke(s, p, "k", "echo", 8).st, status::E_NOT_SUPPORTED);
}

TEST(AdoCallbacks, PoolInfoMatchesAllocatorAccounting)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "info", 16 * MiB);
  for ( int i = 0; i != 3; ++i )
  {
    ASSERT_EQ(h.put(s, p, "k" + std::to_string(i), "v"), status::S_OK);
  }
  auto r = h.invoke(s, p, "k0", "pool_info;alloc:65536;pool_info");
  ASSERT_EQ(r.st, status::S_OK);
  ASSERT_EQ(r.ado.size(), 3u);
  auto f0 = fields(text(r.ado[0]));
  auto f1 = fields(text(r.ado[2]));
  auto size = f0.at(0), free0 = f0.at(1), items = f0.at(2), free1 = f1.at(1);
  std::uint64_t regions = 0;
  for ( auto e : h.sh->store().pool_regions(p) )
  {
    regions += e.length;
  }
  EXPECT_EQ(size, regions);
  EXPECT_EQ(items, 3u);
  EXPECT_LE(free0, size);
  EXPECT_GE(free0 - free1, 65536u);
  engine::pool_info info;
  ASSERT_EQ(h.sh->store().get_pool_info(p, info), status::S_OK);
  EXPECT_EQ(info.free_bytes, free1);
}

TEST(AdoCallbacks, IterateVisitsEveryPair)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "iter");
  for ( int i = 0; i != 5; ++i )
  {
    ASSERT_EQ(h.put(s, p, "key" + std::to_string(i), std::string(10 + i, 'x')), status::S_OK);
  }
  auto r = h.invoke(s, p, "key0", "iterate:0:0;iterate:1:2");
  ASSERT_EQ(r.st, status::S_OK);
  auto all = text(r.ado.at(0));
  EXPECT_EQ(std::count(all.begin(), all.end(), '='), 5);
  for ( int i = 0; i != 5; ++i )
  {
    EXPECT_NE(all.find("key" + std::to_string(i) + "="), std::string::npos);
  }
  auto page = text(r.ado.at(1));
  EXPECT_EQ(std::count(page.begin(), page.end(), '='), 2);
  EXPECT_TRUE(page.ends_with(",3"));
}

TEST(AdoCallbacks, ResizeKeepsOldBytesAsPrefix)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "resize");
  std::string original = "the original value bytes";
  ASSERT_EQ(h.put(s, p, "v", original), status::S_OK);
  ASSERT_EQ(h.put(s, p, "t", "x"), status::S_OK);
  auto r = h.invoke(s, p, "t", "resize:v:5000");
  ASSERT_EQ(r.st, status::S_OK);
  auto g = h.call(s, wire::get_request{false, p, "v"});
  ASSERT_EQ(g.st, status::S_OK);
  ASSERT_EQ(g.value.size(), 5000u);
  EXPECT_EQ(g.value.str().substr(0, original.size()), original);
  EXPECT_EQ(h.sh->lock_audit(), "");
}

TEST(AdoCallbacks, FindAndRefsGoThroughTheShard)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "find");
  ASSERT_EQ(h.call(s, wire::configure_pool_request{p, "AddIndex::VolatileTree"}).st, status::S_OK);
  for ( auto k : {"apple", "banana", "cherry"} )
  {
    ASSERT_EQ(h.put(s, p, k, "v"), status::S_OK);
  }
  auto r = h.invoke(s, p, "apple", "find:1:0:ban;refs;erase:cherry");
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_TRUE(text(r.ado.at(0)).starts_with("banana:"));
  EXPECT_EQ(text(r.ado.at(1)), "3");
  EXPECT_EQ(h.call(s, wire::get_request{false, p, "cherry"}).st, status::E_KEY_NOT_FOUND);
}

TEST(AdoCallbacks, MappingOutsideThePoolFails)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto a = h.create_pool(s, "a");
  auto b = h.create_pool(s, "b");
  ASSERT_EQ(h.put(s, a, "k", "v"), status::S_OK);
  auto other = h.sh->store().pool_regions(b).at(0);
  EXPECT_EQ(h.invoke(s, a, "k", "map:" + std::to_string(other.offset) + ":64").st, status::E_MAP_FAIL);
  EXPECT_EQ(h.invoke(s, a, "k", "map:0:64").st, status::E_MAP_FAIL);
  auto own = h.sh->store().pool_regions(a).at(0);
  EXPECT_EQ(h.invoke(s, a, "k", "map:" + std::to_string(own.offset) + ":64").st, status::S_OK);
}

TEST(AdoSignals, PostPutStallsTheClientUntilThePluginReturns)
{
  auto o = shard_harness::in_process({"testkit"});
  o.signal_post_put = true;
  o.ado_params["signal_sleep_ms"] = "50";
  shard_harness h(memory(), o);
  auto s = h.session();
  auto p = h.create_pool(s, "sig");
  auto t0 = steady_clock::now();
  EXPECT_EQ(h.put(s, p, "k", "v"), status::S_OK);
  auto ms = duration_cast<milliseconds>(steady_clock::now() - t0).count();
  EXPECT_GE(ms, 50);
  EXPECT_LE(ms, 60 + 500);
  EXPECT_EQ(h.sh->lock_audit(), "");
  auto r = h.invoke(s, p, "k", "signals");
  EXPECT_EQ(text(r.ado.at(0)), "1");
  /* erase is not configured */
  EXPECT_EQ(h.call(s, wire::erase_request{p, "k"}).st, status::S_OK);
  r = h.invoke(s, p, "k2", "signals", 8);
  EXPECT_EQ(text(r.ado.at(0)), "1");
}

TEST(AdoSignals, NoSignalsMeansNoAdoTraffic)
{
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "quiet");
  EXPECT_EQ(h.put(s, p, "k", "v"), status::S_OK);
  for ( auto &[k, v] : h.sh->statistics() )
  {
    if ( k == "ado_signals" || k == "ado_works" )
    {
      EXPECT_EQ(v, 0u) << k;
    }
  }
}

TEST(AdoFuzz, GarbageOnTheQueueDoesNotDisturbTheShard)
{
  spdlog::set_level(spdlog::level::err);
  shard_harness h(memory(), shard_harness::in_process({"testkit"}));
  auto s = h.session();
  auto p = h.create_pool(s, "fuzz");
  ASSERT_EQ(h.invoke(s, p, "k", "echo:x", 16).st, status::S_OK);
  std::mt19937_64 rng(11);
  auto valid = ado::encode(ado::callback_request{1, ado::callback_kind::create_key, "zz", 64, 0, 0});
  auto done = ado::encode(ado::work_complete{12345, status::S_OK, {}});
  for ( int i = 0; i != 5000; ++i )
  {
    byte_vector b = i % 3 == 0 ? valid : i % 3 == 1 ? done : byte_vector(rng() % 200);
    if ( i % 3 == 2 )
    {
      for ( auto &x : b )
      {
        x = std::byte(rng());
      }
    }
    else
    {
      for ( int f = 0; f != 3; ++f )
      {
        b[rng() % b.size()] = std::byte(rng());
      }
    }
    h.sh->on_ado_bytes(p, b);
  }
  EXPECT_EQ(h.sh->lock_audit(), "");
  auto r = h.invoke(s, p, "k", "echo:still-here");
  ASSERT_EQ(r.st, status::S_OK);
  EXPECT_EQ(text(r.ado.at(0)), "still-here");
  EXPECT_EQ(h.call(s, wire::get_request{false, p, "zz"}).st, status::E_KEY_NOT_FOUND);
}
