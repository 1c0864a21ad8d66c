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

#include <mcaslite/engine/hop_table.h>
#include <mcaslite/engine/hstore.h>

#include "support/crash_harness.h"
#include "support/model.h"

#include <gtest/gtest.h>

using namespace mcaslite;
using namespace mcaslite::engine;
using mcaslite::test::dump;
using mcaslite::test::for_each_crash_point;
using mcaslite::test::key_for;
using mcaslite::test::model_map;
using mcaslite::test::value_for;

namespace
{
  constexpr std::uint64_t cap = 256 * MiB;

  struct ctx
  {
    std::unique_ptr<pmem::persistent_arena> arena;
    std::unique_ptr<kvstore> kv;
    pool_t pool = 0;
  };

  std::unique_ptr<ctx> open(std::shared_ptr<pmem::backend> b_, const std::string &backend_, engine_options opt_, bool create_)
  {
    auto c = std::make_unique<ctx>();
    c->arena = std::make_unique<pmem::persistent_arena>(b_);
    c->kv = make_kvstore(backend_, *c->arena, opt_);
    if ( create_ )
    {
      EXPECT_EQ(c->kv->create_pool("p", 64 * MiB, c->pool), status::S_OK);
    }
    else
    {
      EXPECT_EQ(c->kv->open_pool("p", c->pool), status::S_OK);
    }
    return c;
  }

  model_map seed_model(std::uint64_t n)
  {
    model_map m;
    for ( std::uint64_t i = 0; i != n; ++i )
    {
      m[key_for(i)] = value_for(i, i % 3 == 0 ? 200 : 8);
    }
    return m;
  }

  /* Recovered state must equal either the pre- or the post-image, pass the
     structural audit and accept further writes without overlap. */
  void check_recovered(std::shared_ptr<pmem::backend> b_, const std::string &backend_, engine_options opt_,
                       const model_map &pre_, const model_map &post_, bool completed_)
  {
    auto c = open(b_, backend_, opt_, false);
    ASSERT_TRUE(c->kv);
    auto got = dump(*c->kv, c->pool);
    if ( completed_ )
    {
      ASSERT_EQ(got, post_);
    }
    else
    {
      ASSERT_TRUE(got == pre_ || got == post_) << "torn state with " << got.size() << " items";
    }
    ASSERT_EQ(c->kv->audit(c->pool), "");
    for ( std::uint64_t i = 0; i != 20; ++i )
    {
      auto k = "after" + std::to_string(i);
      auto v = value_for(i + 1000, 300);
      ASSERT_EQ(c->kv->put(c->pool, as_bytes(k), as_bytes(v)), status::S_OK);
      got[k] = v;
    }
    ASSERT_EQ(dump(*c->kv, c->pool), got);
    ASSERT_EQ(c->kv->audit(c->pool), "");
  }

  template <typename Op>
    void run(const std::string &backend_, engine_options opt_, std::uint64_t seed_n_, Op op_, const model_map &post_, std::uint64_t stride_ = 1)
    {
      auto pre = seed_model(seed_n_);
      auto st = for_each_crash_point(
        cap,
        [&] (std::shared_ptr<pmem::crash_sim_backend> b) {
          auto c = open(b, backend_, opt_, true);
          for ( const auto &[k, v] : pre )
          {
            c->kv->put(c->pool, as_bytes(k), as_bytes(v));
          }
          return c;
        },
        [&] (ctx &c) { op_(c); },
        [&] (std::shared_ptr<pmem::crash_sim_backend> b, bool completed) {
          check_recovered(b, backend_, opt_, pre, post_, completed);
        },
        2, 7, stride_);
      EXPECT_GT(st.flush_points, 0u);
      ::testing::Test::RecordProperty("flush_points", std::to_string(st.flush_points));
    }
}

class engine_crash : public ::testing::TestWithParam<std::string> {};

TEST_P(engine_crash, put_new_key)
{
  auto post = seed_model(50);
  post["fresh-key-beyond-inline-size"] = value_for(9, 500);
  run(GetParam(), {}, 50, [] (ctx &c) {
    ASSERT_EQ(c.kv->put(c.pool, as_bytes("fresh-key-beyond-inline-size"), as_bytes(value_for(9, 500))), status::S_OK);
  }, post);
}

TEST_P(engine_crash, put_inline_key)
{
  auto post = seed_model(50);
  post["k"] = "v";
  run(GetParam(), {}, 50, [] (ctx &c) {
    ASSERT_EQ(c.kv->put(c.pool, as_bytes("k"), as_bytes("v")), status::S_OK);
  }, post);
}

TEST_P(engine_crash, overwrite)
{
  auto post = seed_model(50);
  auto key = key_for(3);
  post[key] = value_for(77, 1000);
  run(GetParam(), {}, 50, [&] (ctx &c) {
    ASSERT_EQ(c.kv->put(c.pool, as_bytes(key), as_bytes(value_for(77, 1000))), status::S_OK);
  }, post);
}

TEST_P(engine_crash, erase)
{
  auto post = seed_model(50);
  auto key = key_for(6);
  post.erase(key);
  run(GetParam(), {}, 50, [&] (ctx &c) {
    ASSERT_EQ(c.kv->erase(c.pool, as_bytes(key)), status::S_OK);
  }, post);
}

TEST_P(engine_crash, resize)
{
  auto post = seed_model(50);
  auto key = key_for(9);
  post[key].resize(700, '\0');
  run(GetParam(), {}, 50, [&] (ctx &c) {
    ASSERT_EQ(c.kv->resize_value(c.pool, as_bytes(key), 700), status::S_OK);
  }, post);
}

/* Segment addition plus redistribution, interrupted at sampled flush points. */
TEST_P(engine_crash, expansion)
{
  engine_options opt;
  opt.base_size = 64;
  auto post = seed_model(40);
  run(GetParam(), opt, 40, [] (ctx &c) {
    ASSERT_EQ(dynamic_cast<hstore &>(*c.kv).table(c.pool)->expand(), status::S_OK);
  }, post, 3);
}

TEST_P(engine_crash, recovery_completes_expansion)
{
  engine_options opt;
  opt.base_size = 64;
  auto b = std::make_shared<pmem::crash_sim_backend>(cap);
  auto pre = seed_model(40);
  {
    auto c = open(b, GetParam(), opt, true);
    for ( const auto &[k, v] : pre )
    {
      c->kv->put(c->pool, as_bytes(k), as_bytes(v));
    }
    /* let the segment link commit, then crash inside normalize */
    b->crash_at_flush(b->flush_count() + 40);
    EXPECT_THROW(dynamic_cast<hstore &>(*c->kv).table(c->pool)->expand(), pmem::simulated_crash);
    b->clear_flush_hook();
  }
  b->crash_drop_all();
  auto c = open(b, GetParam(), opt, false);
  auto *t = dynamic_cast<hstore &>(*c->kv).table(c->pool);
  EXPECT_FALSE(t->expanding());
  EXPECT_EQ(t->bucket_count(), 128u);
  EXPECT_EQ(dump(*c->kv, c->pool), pre);
  EXPECT_EQ(t->audit(), "");
}

INSTANTIATE_TEST_SUITE_P(hstore, engine_crash, ::testing::Values("hstore", "hstore-cc"),
                         [] (const auto &info) { std::string s = info.param; std::erase(s, '-'); return s; });
