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

#ifndef MCASLITE_TESTS_VERSIONING_ORACLE_H
#define MCASLITE_TESTS_VERSIONING_ORACLE_H

#include "crash_harness.h"
#include "shard_harness.h"

#include <mcaslite/plugins/versioning.h>

#include <deque>
#include <optional>
#include <random>

namespace mcaslite::test
{
  constexpr std::uint64_t oracle_max_versions = versioning::default_max_versions;

  struct versioned_shard
  {
    explicit versioned_shard(std::shared_ptr<pmem::backend> b, bool create = true)
      : h(std::make_unique<shard_harness>(std::move(b), shard_harness::in_process({"versioning"})))
    {
      s = h->session();
      if ( create )
      {
        pool = h->create_pool(s, "versions", 64 * MiB);
      }
      else
      {
        auto r = h->call(s, wire::open_pool_request{"versions"});
        pool = r.st == status::S_OK ? r.pool : 0;
        opened = r.st;
      }
    }

    status vput(const std::string &key, const std::string &value)
    {
      return h->call(s, wire::invoke_put_ado_request{pool, key, wire::ADO_FLAG_DETACHED,
                                                     versioning::root_size(oracle_max_versions),
                                                     wire::payload(value),
                                                     wire::payload(versioning::encode_put_request())}).st;
    }

    status vget(const std::string &key, std::int32_t index, std::string &out)
    {
      auto r = h->call(s, wire::invoke_ado_request{pool, key, 0, 0,
                                                   wire::payload(versioning::encode_get_request(index))});
      if ( r.st != status::S_OK )
      {
        return r.st;
      }
      if ( r.ado.size() != 1 )
      {
        return status::E_PROTOCOL;
      }
      versioning::version v;
      if ( auto st = versioning::decode_version(r.ado[0].data, v); st != status::S_OK )
      {
        return st;
      }
      out = to_string(v.value);
      return status::S_OK;
    }

    /* All retained versions, newest first; nullopt on an unexpected status. */
    std::optional<std::vector<std::string>> versions(const std::string &key)
    {
      std::vector<std::string> all;
      for ( std::int32_t i = 0; i != -std::int32_t(oracle_max_versions) - 1; --i )
      {
        std::string v;
        auto st = vget(key, i, v);
        if ( st == status::E_NO_VERSION || (st == status::E_KEY_NOT_FOUND && i == 0) )
        {
          return all;
        }
        if ( st != status::S_OK || i == -std::int32_t(oracle_max_versions) )
        {
          return std::nullopt;
        }
        all.push_back(std::move(v));
      }
      return all;
    }

    std::unique_ptr<shard_harness> h;
    server::session_id s = 0;
    engine::pool_t pool = 0;
    status opened = status::S_OK;
  };

  struct oracle_result
  {
    std::uint64_t sequences = 0;
    std::uint64_t checks = 0;
    std::uint64_t mismatches = 0;
    std::string first_problem;
  };

  /* Random put sequences on fresh keys; after every put vget(0) and vget(-1)
     are compared with a hand-kept ring of the last MAX_VERSIONS values, and at
     the end of each sequence every index down to -MAX_VERSIONS. */
  inline oracle_result run_version_oracle(unsigned sequences, std::uint64_t seed = 3)
  {
    oracle_result res;
    std::mt19937_64 rng(seed);
    versioned_shard vs(std::make_shared<pmem::crash_sim_backend>(256 * MiB));
    auto expect = [&] (bool ok, const std::string &what) {
      ++res.checks;
      if ( ! ok )
      {
        ++res.mismatches;
        if ( res.first_problem.empty() )
        {
          res.first_problem = what;
        }
      }
    };
    for ( unsigned q = 0; q != sequences; ++q )
    {
      auto key = "seq" + std::to_string(q);
      std::deque<std::string> ring;
      unsigned puts = 1 + rng() % 20;
      for ( unsigned p = 0; p != puts; ++p )
      {
        std::string v(1 + rng() % 3000, char('a' + rng() % 26));
        v += std::to_string(p);
        expect(vs.vput(key, v) == status::S_OK, key + " vput " + std::to_string(p));
        ring.push_back(v);
        if ( ring.size() > oracle_max_versions )
        {
          ring.pop_front();
        }
        std::string got;
        expect(vs.vget(key, 0, got) == status::S_OK && got == ring.back(), key + " vget(0) after put " + std::to_string(p));
        auto st = vs.vget(key, -1, got);
        if ( ring.size() < 2 )
        {
          expect(st == status::E_NO_VERSION, key + " vget(-1) with one version");
        }
        else
        {
          expect(st == status::S_OK && got == ring[ring.size() - 2], key + " vget(-1) after put " + std::to_string(p));
        }
      }
      auto all = vs.versions(key);
      expect(all && std::equal(all->begin(), all->end(), ring.rbegin(), ring.rend()), key + " full history");
      ++res.sequences;
    }
    return res;
  }

  struct vput_crash_result
  {
    std::uint64_t crash_states = 0;
    std::uint64_t flush_points = 0;
    std::uint64_t bad = 0;
    std::string first_problem;
  };

  /* Interrupts a vput at every flush point, on keys holding 0, 3 and
     MAX_VERSIONS versions (the last displaces the oldest), and requires the
     recovered history to be the pre- or post-image. */
  inline vput_crash_result run_vput_crash_points(unsigned random_subsets = 2)
  {
    vput_crash_result res;
    auto bad = [&] (const std::string &what) {
      ++res.bad;
      if ( res.first_problem.empty() )
      {
        res.first_problem = what;
      }
    };
    for ( unsigned existing : {0u, 3u, unsigned(oracle_max_versions)} )
    {
      std::vector<std::string> pre;
      for ( unsigned i = 0; i != existing; ++i )
      {
        pre.insert(pre.begin(), std::string(100 + 50 * i, char('p' + i)));
      }
      const std::string added(5000, 'N');
      auto post = pre;
      post.insert(post.begin(), added);
      if ( post.size() > oracle_max_versions )
      {
        post.pop_back();
      }
      auto st = for_each_crash_point(
        256 * MiB,
        [&] (std::shared_ptr<pmem::crash_sim_backend> b) {
          auto vs = std::make_unique<versioned_shard>(b);
          vs->h->put(vs->s, vs->pool, "other", "bystander");
          for ( auto it = pre.rbegin(); it != pre.rend(); ++it )
          {
            vs->vput("k", *it);
          }
          return vs;
        },
        [&] (versioned_shard &vs) { vs.vput("k", added); },
        [&] (std::shared_ptr<pmem::crash_sim_backend> b, bool completed) {
          versioned_shard vs(b, false);
          auto where = std::to_string(existing) + " versions";
          if ( vs.opened != status::S_OK )
          {
            bad("pool lost with " + where);
            return;
          }
          auto got = vs.versions("k");
          if ( ! got || (*got != post && (completed || *got != pre)) )
          {
            bad("history with " + where + (got ? " has " + std::to_string(got->size()) + " entries" : " unreadable"));
          }
          std::string other;
          if ( vs.h->call(vs.s, wire::get_request{false, vs.pool, "other"}).value.str() != "bystander" )
          {
            bad("bystander lost with " + where);
          }
          if ( vs.vput("k", "again") != status::S_OK || vs.vget("k", 0, other) != status::S_OK || other != "again" )
          {
            bad("vput after recovery with " + where);
          }
          if ( auto a = vs.h->sh->lock_audit(); ! a.empty() )
          {
            bad("lock audit: " + a);
          }
          if ( auto a = vs.h->sh->store().audit(vs.pool); ! a.empty() )
          {
            bad("store audit: " + a);
          }
        },
        random_subsets, 11);
      res.crash_states += st.crash_states;
      res.flush_points += st.flush_points;
    }
    return res;
  }
}

#endif
