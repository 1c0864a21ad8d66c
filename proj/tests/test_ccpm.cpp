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

#include <mcaslite/ccpm/cc_heap.h>
#include <mcaslite/ccpm/undo_log.h>

#include "support/crash_harness.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <bitset>
#include <random>

using namespace mcaslite;
using namespace mcaslite::ccpm;
using mcaslite::pmem::persistent_arena;
using mcaslite::test::for_each_crash_point;

namespace
{
  constexpr std::uint64_t cap = 64 * MiB;
  constexpr std::uint64_t heap_base = pmem::header_extent;
  constexpr std::uint64_t heap_len = 4 * MiB;

  extent heap_extent() { return {heap_base, heap_len}; }

  /* undo log at the start of the extent, data area after it */
  constexpr std::uint64_t data_base = heap_base + round_up(undo_log::footprint(), 4096);

  struct log_ctx
  {
    std::unique_ptr<persistent_arena> a;
    std::unique_ptr<undo_log> log;
  };

  std::unique_ptr<log_ctx> make_log(std::shared_ptr<pmem::crash_sim_backend> b, bool fresh)
  {
    auto c = std::make_unique<log_ctx>();
    c->a = std::make_unique<persistent_arena>(b);
    c->log = std::make_unique<undo_log>(*c->a, heap_base, std::vector<extent>{heap_extent()});
    if ( fresh )
    {
      c->log->format();
    }
    return c;
  }

  byte_vector snapshot(const persistent_arena &a, std::uint64_t off, std::uint64_t len)
  {
    auto v = a.view(off, len);
    return {v.begin(), v.end()};
  }
}

TEST(undo_log, record_outside_allowed_is_range_error)
{
  auto c = make_log(std::make_shared<pmem::crash_sim_backend>(cap), true);
  EXPECT_EQ(c->log->record(heap_base + heap_len - 4, 8), status::E_RANGE);
  EXPECT_EQ(c->log->record(0, 8), status::E_RANGE);
}

TEST(undo_log, bounded_entries)
{
  auto c = make_log(std::make_shared<pmem::crash_sim_backend>(cap), true);
  for ( std::uint64_t i = 0; i != undo_log::default_max_entries; ++i )
  {
    ASSERT_EQ(c->log->record(data_base + i * 8192, 8), status::S_OK);
  }
  EXPECT_EQ(c->log->record(data_base + 1 * MiB, 8), status::E_LOG_FULL);
  c->log->rollback();
  EXPECT_FALSE(c->log->armed());
}

TEST(undo_log, commit_on_empty_log_is_noop)
{
  auto b = std::make_shared<pmem::crash_sim_backend>(cap);
  auto c = make_log(b, true);
  auto flushes = b->flush_count();
  c->log->commit();
  EXPECT_EQ(b->flush_count(), flushes);
  EXPECT_FALSE(c->log->armed());
}

/* Appendix-style bitset: flip bit 6 under the log, then roll back. */
TEST(undo_log, flip_then_rollback_restores_bit)
{
  auto c = make_log(std::make_shared<pmem::crash_sim_backend>(cap), true);
  auto &a = *c->a;
  a.store64(data_base, 0b1010);
  a.persist(data_base, 8);
  ASSERT_EQ(c->log->record(data_base, 8), status::S_OK);
  std::bitset<64> bits(a.load64(data_base));
  bits.flip(6);
  a.store64(data_base, bits.to_ullong());
  EXPECT_TRUE(std::bitset<64>(a.load64(data_base)).test(6));
  c->log->rollback();
  EXPECT_FALSE(std::bitset<64>(a.load64(data_base)).test(6));
  EXPECT_EQ(a.load64(data_base), 0b1010u);
}

TEST(undo_log, rollback_restores_all_ranges_including_large)
{
  auto c = make_log(std::make_shared<pmem::crash_sim_backend>(cap), true);
  auto &a = *c->a;
  std::mt19937_64 rng(3);
  for ( std::uint64_t i = 0; i != 20000; i += 8 )
  {
    a.store64(data_base + i, rng());
  }
  a.persist(data_base, 20000);
  auto before = snapshot(a, data_base, 20000);

  ASSERT_EQ(c->log->record(data_base + 64, 16), status::S_OK);
  a.store64(data_base + 64, 1);
  ASSERT_EQ(c->log->record(data_base + 1000, 10000), status::S_OK);  /* spans 3 entries */
  a.fill(data_base + 1000, 10000, std::byte{0xee});
  ASSERT_EQ(c->log->record(data_base + 64, 8), status::S_OK);         /* already covered */
  a.store64(data_base + 64, 2);
  c->log->rollback();
  EXPECT_EQ(snapshot(a, data_base, 20000), before);
}

TEST(undo_log, rollback_equals_crash_recover)
{
  auto run = [] (std::shared_ptr<pmem::crash_sim_backend> b) {
    auto c = make_log(b, true);
    auto &a = *c->a;
    for ( std::uint64_t i = 0; i != 4096; i += 8 )
    {
      a.store64(data_base + i, i * 7);
    }
    a.persist(data_base, 4096);
    c->log->record(data_base, 512);
    c->log->record(data_base + 2048, 1024);
    a.fill(data_base, 512, std::byte{1});
    a.fill(data_base + 2048, 1024, std::byte{2});
    return c;
  };
  auto b1 = std::make_shared<pmem::crash_sim_backend>(cap);
  auto c1 = run(b1);
  c1->log->rollback();
  auto rolled = snapshot(*c1->a, data_base, 4096);

  auto b2 = std::make_shared<pmem::crash_sim_backend>(cap);
  run(b2).reset();
  std::mt19937_64 rng(4);
  b2->crash_random(rng);
  auto c2 = make_log(b2, false);
  EXPECT_TRUE(c2->log->recover());
  EXPECT_EQ(snapshot(*c2->a, data_base, 4096), rolled);
  EXPECT_FALSE(c2->log->recover());
  EXPECT_EQ(snapshot(*c2->a, data_base, 4096), rolled);
}

/* A three-range transaction interrupted at every flush point recovers to
   exactly the pre-image or the committed image. */
TEST(undo_log_crash, transaction_is_atomic)
{
  auto pre = [] (persistent_arena &a) {
    for ( std::uint64_t i = 0; i != 8192; i += 8 )
    {
      a.store64(data_base + i, i);
    }
    a.persist(data_base, 8192);
  };
  auto mutate = [] (log_ctx &c) {
    auto &a = *c.a;
    c.log->record(data_base, 64);
    a.store64(data_base, 0xaaaa);
    a.store64(data_base + 56, 0xbbbb);
    c.log->record(data_base + 4096, 200);
    a.fill(data_base + 4096, 200, std::byte{0xcc});
    c.log->record(data_base + 8000, 16);
    a.store64(data_base + 8000, 0xdddd);
    c.log->commit();
  };

  byte_vector before, after;
  {
    auto c = make_log(std::make_shared<pmem::crash_sim_backend>(cap), true);
    pre(*c->a);
    before = snapshot(*c->a, data_base, 8192);
    mutate(*c);
    after = snapshot(*c->a, data_base, 8192);
  }

  auto st = for_each_crash_point(
    cap,
    [&] (std::shared_ptr<pmem::crash_sim_backend> b) {
      auto c = make_log(b, true);
      pre(*c->a);
      return c;
    },
    mutate,
    [&] (std::shared_ptr<pmem::crash_sim_backend> b, bool) {
      auto c = make_log(b, false);
      c->log->recover();
      auto s = snapshot(*c->a, data_base, 8192);
      EXPECT_TRUE(s == before || s == after);
      EXPECT_FALSE(c->log->armed());
    },
    8);
  EXPECT_GE(st.crash_states, 30u);
}

namespace
{
  struct heap_ctx
  {
    std::unique_ptr<persistent_arena> a;
    std::unique_ptr<cc_heap> h;
  };

  std::vector<extent> heap_regions()
  {
    return {{pmem::header_extent, 32 * MiB}};
  }

  std::unique_ptr<heap_ctx> make_heap(std::shared_ptr<pmem::crash_sim_backend> b, bool fresh)
  {
    auto c = std::make_unique<heap_ctx>();
    c->a = std::make_unique<persistent_arena>(b);
    c->h = std::make_unique<cc_heap>(*c->a, heap_regions(), fresh);
    return c;
  }
}

TEST(cc_heap, zero_regions_rejected)
{
  persistent_arena a(std::make_shared<pmem::crash_sim_backend>(cap));
  try
  {
    cc_heap h(a, {}, true);
    FAIL();
  }
  catch ( const error &e )
  {
    EXPECT_EQ(e.code(), status::E_INVALID);
  }
}

TEST(cc_heap, root_survives_reopen)
{
  auto b = std::make_shared<pmem::crash_sim_backend>(cap);
  std::uint64_t root;
  {
    auto c = make_heap(b, true);
    ASSERT_EQ(c->h->allocate_root(64, root), status::S_OK);
    c->h->commit();
  }
  b->crash_drop_all();
  auto c = make_heap(b, false);
  EXPECT_EQ(c->h->root(), root);
  EXPECT_EQ(c->h->root_size(), 64u);
}

TEST(cc_heap, allocations_disjoint)
{
  auto c = make_heap(std::make_shared<pmem::crash_sim_backend>(cap), true);
  std::vector<extent> v;
  for ( int i = 0; i != 100; ++i )
  {
    std::uint64_t off;
    ASSERT_EQ(c->h->allocate(64, off), status::S_OK);
    c->h->commit();
    v.push_back({off, 64});
  }
  std::sort(v.begin(), v.end(), [] (auto &x, auto &y) { return x.offset < y.offset; });
  for ( std::size_t i = 1; i < v.size(); ++i )
  {
    EXPECT_LE(v[i - 1].end(), v[i].offset);
  }
  std::uint64_t off;
  EXPECT_EQ(c->h->allocate(0, off), status::E_INVALID);
}

TEST(cc_heap, free_makes_space_reusable)
{
  auto c = make_heap(std::make_shared<pmem::crash_sim_backend>(cap), true);
  auto initial = c->h->free_bytes();
  for ( int round = 0; round != 50; ++round )
  {
    std::vector<std::uint64_t> offs;
    for ( int i = 0; i != 20; ++i )
    {
      std::uint64_t off;
      ASSERT_EQ(c->h->allocate(std::uint64_t(100 + i * 37), off), status::S_OK);
      offs.push_back(off);
    }
    c->h->commit();
    std::shuffle(offs.begin(), offs.end(), std::mt19937_64(std::uint64_t(round)));
    for ( auto o : offs )
    {
      ASSERT_EQ(c->h->free(o), status::S_OK);
    }
    c->h->commit();
  }
  EXPECT_EQ(c->h->free_bytes(), initial);
  EXPECT_EQ(c->h->free_blocks().size(), 1u);
}

TEST(cc_heap, double_free_rejected)
{
  auto c = make_heap(std::make_shared<pmem::crash_sim_backend>(cap), true);
  std::uint64_t a, b;
  ASSERT_EQ(c->h->allocate(40, a), status::S_OK);
  ASSERT_EQ(c->h->allocate(40, b), status::S_OK);
  c->h->commit();
  ASSERT_EQ(c->h->free(a), status::S_OK);
  c->h->commit();
  EXPECT_EQ(c->h->free(a), status::E_BAD_FREE);
  EXPECT_EQ(c->h->free(a + 8), status::E_BAD_FREE);
  EXPECT_EQ(c->h->free(1), status::E_BAD_FREE);
}

TEST(cc_heap, exhaustion)
{
  auto c = make_heap(std::make_shared<pmem::crash_sim_backend>(cap), true);
  std::uint64_t off;
  EXPECT_EQ(c->h->allocate(64 * MiB, off), status::E_NO_SPACE);
}

TEST(cc_heap, reopen_with_armed_log_rolls_back)
{
  auto b = std::make_shared<pmem::crash_sim_backend>(cap);
  std::uint64_t free_before;
  {
    auto c = make_heap(b, true);
    free_before = c->h->free_bytes();
    std::uint64_t off;
    c->h->allocate(1000, off);
    c->h->allocate(2000, off);
    /* no commit */
  }
  b->crash([] (std::uint64_t) { return true; });
  auto c = make_heap(b, false);
  EXPECT_TRUE(c->h->recovered());
  EXPECT_EQ(c->h->free_bytes(), free_before);
  EXPECT_FALSE(c->h->log().armed());
}

/* Allocation plus a user write in one transaction: after any crash the heap
   is either untouched or holds the committed block with its contents. */
TEST(cc_heap_crash, alloc_transaction_atomic)
{
  std::uint64_t free_before = 0;
  for_each_crash_point(
    cap,
    [&] (std::shared_ptr<pmem::crash_sim_backend> b) {
      auto c = make_heap(b, true);
      std::uint64_t r;
      c->h->allocate_root(64, r);
      c->h->commit();
      free_before = c->h->free_bytes();
      return c;
    },
    [] (heap_ctx &c) {
      std::uint64_t off;
      c.h->allocate(300, off);
      c.h->record(c.h->root(), 8);
      c.a->store64(c.h->root(), off);
      c.a->fill(off, 300, std::byte{0x42});
      c.a->persist(off, 300);
      c.h->commit();
    },
    [&] (std::shared_ptr<pmem::crash_sim_backend> b, bool completed) {
      auto c = make_heap(b, false);
      auto link = c->a->load64(c->h->root());
      if ( link == 0 )
      {
        EXPECT_FALSE(completed);
        EXPECT_EQ(c->h->free_bytes(), free_before);
      }
      else
      {
        EXPECT_EQ(c->h->usable_size(link) >= 300, true);
        EXPECT_LT(c->h->free_bytes(), free_before);
        auto v = c->a->view(link, 300);
        EXPECT_TRUE(std::all_of(v.begin(), v.end(), [] (std::byte x) { return x == std::byte{0x42}; }));
        EXPECT_EQ(c->h->free(link), status::S_OK);
        c->h->commit();
        EXPECT_EQ(c->h->free_bytes(), free_before);
      }
    },
    4);
}
