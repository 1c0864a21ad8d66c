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

#ifndef MCASLITE_TESTS_DURABILITY_H
#define MCASLITE_TESTS_DURABILITY_H

#include "shard_harness.h"

#include <mcaslite/pmem/backend.h>

#include <optional>
#include <random>
#include <sstream>

namespace mcaslite::test
{
  struct durability_result
  {
    std::uint64_t kill_points = 0;
    std::uint64_t acked = 0;          /* mutations acknowledged before their kill point */
    std::uint64_t lost = 0;           /* keys whose recovered value matches no legal outcome */
    std::uint64_t late_flushes = 0;   /* flushes issued while tearing down a crashed shard */
    std::string first_problem;
  };

  /* Kill-after-ack harness. Each kill point runs a seeded stream of put, erase,
     direct put and offset writes through a shard, crashes it at a random
     flush, materializes a random legal crash image, restarts a shard on it and
     compares every key with the acknowledged history. The request in progress
     at the crash may land either way; an offset write lands in place, so each
     of its bytes may independently hold the old or the new content. */
  inline durability_result run_kill_points(unsigned count, std::uint64_t seed = 1)
  {
    constexpr unsigned keys = 24;
    constexpr std::uint64_t capacity = 64 * MiB;
    durability_result res;
    auto problem = [&] (const std::string &what) {
      ++res.lost;
      if ( res.first_problem.empty() )
      {
        res.first_problem = what;
      }
    };

    for ( unsigned point = 0; point != count; ++point )
    {
      std::mt19937_64 rng(seed * 1000003 + point);
      auto b = std::make_shared<pmem::crash_sim_backend>(capacity);
      using value = std::optional<std::string>;
      std::map<std::string, value> model;
      std::map<std::string, std::vector<value>> alternatives;
      std::map<std::string, std::pair<std::string, std::string>> in_place;
      {
        shard_harness h(b);
        auto s = h.session();
        auto pool = h.create_pool(s, "d", 24 * MiB);
        /* warm state, fully acknowledged */
        for ( unsigned i = 0; i != keys / 2; ++i )
        {
          auto k = "key" + std::to_string(i);
          auto v = std::string(1 + rng() % 200, char('a' + i));
          if ( h.put(s, pool, k, v) == status::S_OK )
          {
            model[k] = v;
          }
        }
        b->crash_at_flush(b->flush_count() + rng() % 400);
        try
        {
          for ( unsigned op = 0; op != 200; ++op )
          {
            auto k = "key" + std::to_string(rng() % keys);
            auto old = model.count(k) ? model[k] : value{};
            auto choice = rng() % 10;
            std::optional<std::string> next;
            wire::body req;
            if ( choice < 5 || (choice >= 8 && ! old) )
            {
              next = std::string(1 + rng() % 900, char('A' + rng() % 26));
              next->back() = char('0' + op % 10);
              req = wire::put_request{false, pool, 0, k, wire::payload(*next)};
            }
            else if ( choice < 7 )
            {
              req = wire::erase_request{pool, k};
            }
            else if ( choice < 8 )
            {
              next = std::string(4096 + rng() % 60000, char('a' + rng() % 26));
              req = wire::put_request{true, pool, 0, k, wire::payload(*next)};
            }
            else
            {
              auto off = rng() % old->size();
              auto len = 1 + rng() % (old->size() - off);
              std::string patch(len, char('0' + rng() % 10));
              next = *old;
              next->replace(off, len, patch);
              req = wire::put_offset_request{pool, k, off, wire::payload(patch)};
            }
            alternatives[k] = {old, next};
            if ( std::holds_alternative<wire::put_offset_request>(req) )
            {
              in_place[k] = {*old, *next};
            }
            auto r = h.call(s, std::move(req));
            alternatives.erase(k);
            in_place.erase(k);
            if ( r.st == status::S_OK )
            {
              ++res.acked;
              model[k] = next;
            }
            else if ( ! (r.st == status::E_KEY_NOT_FOUND && ! old) )
            {
              problem("op " + std::to_string(op) + " failed with " + std::string(status_name(r.st)));
            }
          }
        }
        catch ( const pmem::simulated_crash & )
        {
        }
        b->set_flush_hook([&] (std::uint64_t) { ++res.late_flushes; });
      }
      b->clear_flush_hook();
      switch ( point % 3 )
      {
      case 0: b->crash_drop_all(); break;
      case 1: b->crash([] (std::uint64_t) { return true; }); break;
      default: b->crash_random(rng); break;
      }
      ++res.kill_points;

      shard_harness again(b);
      auto s = again.session();
      auto r = again.call(s, wire::open_pool_request{"d"});
      if ( r.st != status::S_OK )
      {
        problem("pool lost at kill point " + std::to_string(point));
        continue;
      }
      for ( unsigned i = 0; i != keys; ++i )
      {
        auto k = "key" + std::to_string(i);
        auto g = again.call(s, wire::get_request{false, r.pool, k});
        value got = g.st == status::S_OK ? value(g.value.str()) : value{};
        if ( g.st != status::S_OK && g.st != status::E_KEY_NOT_FOUND )
        {
          problem(k + ": get failed with " + std::string(status_name(g.st)));
          continue;
        }
        std::vector<value> legal{model.count(k) ? model[k] : value{}};
        if ( auto a = alternatives.find(k); a != alternatives.end() )
        {
          legal = a->second;
        }
        auto blend = [&] {
          auto p = in_place.find(k);
          if ( p == in_place.end() || ! got || got->size() != p->second.first.size() )
          {
            return false;
          }
          for ( std::size_t j = 0; j != got->size(); ++j )
          {
            if ( (*got)[j] != p->second.first[j] && (*got)[j] != p->second.second[j] )
            {
              return false;
            }
          }
          return true;
        };
        if ( std::find(legal.begin(), legal.end(), got) == legal.end() && ! blend() )
        {
          std::ostringstream os;
          os << "kill point " << point << ": " << k << " recovered "
             << (got ? std::to_string(got->size()) + " bytes" : "absent");
          problem(os.str());
        }
      }
      auto audit = again.sh->store().audit(r.pool);
      if ( ! audit.empty() )
      {
        problem("audit at kill point " + std::to_string(point) + ": " + audit);
      }
    }
    return res;
  }
}

#endif
