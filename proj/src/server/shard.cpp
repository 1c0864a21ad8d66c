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

#include <mcaslite/index/secondary_index.h>
#include <mcaslite/server/shard.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cassert>
#include <chrono>
#include <deque>
#include <map>
#include <thread>

namespace mcaslite::server
{
  using engine::pool_t;
  using engine::lock_type;
  using namespace std::chrono;

  namespace
  {
    /* Work items outstanding per ADO queue; keeps the ring from ever filling
       so callback replies always find room. */
    constexpr unsigned max_ado_inflight = 32;
    constexpr std::string_view index_add = "AddIndex::VolatileTree";
    constexpr std::string_view index_remove = "RemoveIndex::";

    std::uint64_t wall_ns()
    {
      return std::uint64_t(duration_cast<nanoseconds>(system_clock::now().time_since_epoch()).count());
    }

    wire::response reply(wire::opcode op_, status st_ = status::S_OK)
    {
      wire::response r;
      r.for_op = op_;
      r.st = st_;
      return r;
    }
  }

  struct shard::impl
  {
    struct session_state
    {
      bool handshaken = false;
      std::map<pool_t, unsigned> pools;
      bool parked = false;
      std::deque<wire::message> queued;
    };

    struct pool_state
    {
      unsigned opens = 0;
      std::unique_ptr<index::secondary_index> index;
      std::unique_ptr<ado_link> ado;
      std::deque<ado::work_request> backlog;
      unsigned inflight = 0;
      steady_clock::time_point last_alive_check;
    };

    struct held_lock
    {
      std::string key;
      lock_type type;
    };

    struct work_state
    {
      session_id session;
      std::uint64_t request_id;
      pool_t pool;
      wire::opcode op;
      bool signal = false;
      wire::response signal_response;   /* the client's original result, sent on completion */
      std::vector<held_lock> locks;     /* [0] is the invoke target, unlocked only at completion */
      steady_clock::time_point start;
    };

    impl(pmem::persistent_arena &arena_, shard_options options_, shard_hooks hooks_)
      : arena(arena_)
      , opts(std::move(options_))
      , hooks(std::move(hooks_))
      , store(engine::make_kvstore(opts.backend, arena, opts.engine))
    {}

    ~impl()
    {
      for ( auto &[id, p] : pools )
      {
        if ( p.ado )
        {
          try
          {
            p.ado->shutdown();
          }
          catch ( const std::exception &e )
          {
            spdlog::warn("shard {}: ADO shutdown for pool {}: {}", opts.index, id, e.what());
          }
        }
      }
    }

    pmem::persistent_arena &arena;
    shard_options opts;
    shard_hooks hooks;
    std::unique_ptr<engine::kvstore> store;

    std::map<session_id, session_state> sessions;
    std::map<pool_t, pool_state> pools;
    std::map<std::uint64_t, work_state> works;
    std::uint64_t next_work = 1;
    std::map<std::pair<pool_t, std::string>, std::uint64_t> timestamps;
    std::map<std::string, std::uint64_t> stats;
    std::thread::id owner;

    void check_thread()
    {
#ifndef NDEBUG
      if ( owner == std::thread::id{} )
      {
        owner = std::this_thread::get_id();
      }
      assert(owner == std::this_thread::get_id());
#endif
    }

    /* ---- responses and session flow ---- */

    void respond(session_id sid_, std::uint64_t rid_, wire::response r_, steady_clock::time_point start_)
    {
      auto name = std::string(wire::opcode_name(r_.for_op));
      stats["latency_ns." + name] += std::uint64_t(duration_cast<nanoseconds>(steady_clock::now() - start_).count());
      if ( r_.st != status::S_OK )
      {
        stats["errors"]++;
      }
      if ( ! sessions.contains(sid_) )
      {
        return;
      }
      stats["bytes_out"] += r_.value.size();
      hooks.respond(sid_, wire::message{rid_, std::move(r_)});
    }

    void unpark(session_id sid_)
    {
      auto it = sessions.find(sid_);
      if ( it == sessions.end() )
      {
        return;
      }
      it->second.parked = false;
      while ( ! it->second.parked && ! it->second.queued.empty() )
      {
        auto m = std::move(it->second.queued.front());
        it->second.queued.pop_front();
        execute(sid_, it->second, std::move(m));
        it = sessions.find(sid_);
        if ( it == sessions.end() )
        {
          return;
        }
      }
    }

    bool holds(const session_state &s_, pool_t pool_) const
    {
      return s_.pools.contains(pool_);
    }

    void touch(pool_t pool_, std::string_view key_)
    {
      timestamps[{pool_, std::string(key_)}] = wall_ns();
    }

    void forget(pool_t pool_, std::string_view key_)
    {
      timestamps.erase({pool_, std::string(key_)});
    }

    void index_insert(pool_t pool_, std::string_view key_)
    {
      if ( auto it = pools.find(pool_); it != pools.end() && it->second.index )
      {
        it->second.index->insert(key_);
      }
    }

    void index_erase(pool_t pool_, std::string_view key_)
    {
      if ( auto it = pools.find(pool_); it != pools.end() && it->second.index )
      {
        it->second.index->erase(key_);
      }
    }

    bool write_locked(pool_t pool_, std::string_view key_) const
    {
      for ( const auto &l : store->locks() )
      {
        if ( l.pool == pool_ && l.key == key_ )
        {
          return l.writer;
        }
      }
      return false;
    }

    /* ---- request dispatch ---- */

    void execute(session_id sid_, session_state &s_, wire::message &&m_)
    {
      auto start = steady_clock::now();
      auto rid = m_.request_id;
      auto op = wire::opcode_of(m_.content);
      stats["op." + std::string(wire::opcode_name(op))]++;

      if ( auto h = std::get_if<wire::handshake_request>(&m_.content) )
      {
        auto r = reply(op, h->version == wire::protocol_version ? status::S_OK : status::E_VERSION);
        r.version = wire::protocol_version;
        if ( r.st == status::S_OK )
        {
          s_.handshaken = true;
        }
        respond(sid_, rid, std::move(r), start);
        if ( ! s_.handshaken )
        {
          hooks.drop(sid_);
        }
        return;
      }
      if ( ! s_.handshaken || std::holds_alternative<wire::response>(m_.content) )
      {
        respond(sid_, rid, reply(op, status::E_PROTOCOL), start);
        hooks.drop(sid_);
        return;
      }

      std::visit([&] (auto &req) { handle(sid_, s_, rid, start, req); }, m_.content);
    }

    void handle(session_id, session_state &, std::uint64_t, steady_clock::time_point, wire::handshake_request &) {}
    void handle(session_id, session_state &, std::uint64_t, steady_clock::time_point, wire::response &) {}

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::create_pool_request &r_)
    {
      auto r = reply(wire::opcode::CREATE_POOL);
      pool_t id;
      if ( (r_.flags & wire::POOL_FLAG_CREATE_ONLY) && store->open_pool(r_.name, id) == status::S_OK )
      {
        r.st = status::E_ALREADY_EXISTS;
      }
      else if ( (r.st = store->create_pool(r_.name, r_.size, id)) == status::S_OK )
      {
        opened(s_, id);
        r.pool = id;
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::open_pool_request &r_)
    {
      auto r = reply(wire::opcode::OPEN_POOL);
      pool_t id;
      if ( (r.st = store->open_pool(r_.name, id)) == status::S_OK )
      {
        opened(s_, id);
        r.pool = id;
      }
      else
      {
        r.st = status::E_BAD_POOL;
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void opened(session_state &s_, pool_t id_)
    {
      s_.pools[id_]++;
      pools[id_].opens++;
    }

    void closed(session_state &s_, pool_t id_, unsigned count_)
    {
      auto &c = s_.pools[id_];
      c -= count_;
      if ( c == 0 )
      {
        s_.pools.erase(id_);
      }
      if ( auto it = pools.find(id_); it != pools.end() )
      {
        it->second.opens -= count_;
      }
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::close_pool_request &r_)
    {
      auto r = reply(wire::opcode::CLOSE_POOL);
      if ( holds(s_, r_.pool) )
      {
        closed(s_, r_.pool, 1);
      }
      else
      {
        r.st = status::E_BAD_POOL;
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::delete_pool_request &r_)
    {
      auto r = reply(wire::opcode::DELETE_POOL);
      pool_t id;
      if ( store->open_pool(r_.name, id) != status::S_OK )
      {
        r.st = status::E_BAD_POOL;
        respond(sid_, rid_, std::move(r), t_);
        return;
      }
      unsigned mine = s_.pools.contains(id) ? s_.pools[id] : 0;
      auto &p = pools[id];
      bool busy_works = std::any_of(works.begin(), works.end(), [id] (const auto &w) { return w.second.pool == id; });
      if ( p.opens > mine || busy_works )
      {
        r.st = status::E_BUSY;
        respond(sid_, rid_, std::move(r), t_);
        return;
      }
      if ( mine )
      {
        closed(s_, id, mine);
      }
      if ( p.ado )
      {
        p.ado->shutdown();
      }
      pools.erase(id);
      std::erase_if(timestamps, [id] (const auto &kv) { return kv.first.first == id; });
      r.st = store->delete_pool(r_.name);
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::configure_pool_request &r_)
    {
      auto r = reply(wire::opcode::CONFIGURE_POOL);
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( r_.command == index_add )
      {
        auto idx = std::make_unique<index::secondary_index>();
        store->iterate(r_.pool, [&] (byte_span k, engine::value_ref) { idx->insert(as_string_view(k)); });
        pools[r_.pool].index = std::move(idx);
      }
      else if ( r_.command == index_remove )
      {
        pools[r_.pool].index.reset();
      }
      else
      {
        r.st = status::E_INVALID;
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::put_request &r_)
    {
      auto r = reply(r_.direct ? wire::opcode::PUT_DIRECT : wire::opcode::PUT);
      auto key = as_bytes(r_.key);
      stats["bytes_in"] += r_.value.size();
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( r_.value.size() >= (r_.direct ? wire::max_direct_value + 1 : wire::small_value_limit) )
      {
        r.st = status::E_TOO_LARGE;
      }
      else if ( store->is_locked(r_.pool, key) )
      {
        r.st = status::E_LOCKED;
      }
      else if ( (r.st = store->put(r_.pool, key, r_.value.bytes(), r_.flags)) == status::S_OK )
      {
        index_insert(r_.pool, r_.key);
        touch(r_.pool, r_.key);
        if ( opts.signal_post_put && signal(sid_, s_, rid_, t_, r_.pool, r_.key, "post-put", r) )
        {
          return;
        }
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::get_request &r_)
    {
      auto r = reply(r_.direct ? wire::opcode::GET_DIRECT : wire::opcode::GET);
      auto key = as_bytes(r_.key);
      byte_vector v;
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( write_locked(r_.pool, r_.key) )
      {
        r.st = status::E_LOCKED;
      }
      else if ( (r.st = store->get(r_.pool, key, v)) == status::S_OK )
      {
        if ( ! r_.direct && v.size() >= wire::small_value_limit )
        {
          r.st = status::E_TOO_LARGE;
        }
        else
        {
          r.value = wire::payload(std::move(v));
        }
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::erase_request &r_)
    {
      auto r = reply(wire::opcode::ERASE);
      auto key = as_bytes(r_.key);
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( store->is_locked(r_.pool, key) )
      {
        r.st = status::E_LOCKED;
      }
      else if ( (r.st = store->erase(r_.pool, key)) == status::S_OK )
      {
        index_erase(r_.pool, r_.key);
        forget(r_.pool, r_.key);
        if ( opts.signal_post_erase && signal(sid_, s_, rid_, t_, r_.pool, r_.key, "post-erase", r) )
        {
          return;
        }
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::put_offset_request &r_)
    {
      auto r = reply(wire::opcode::PUT_DIRECT_OFFSET);
      auto key = as_bytes(r_.key);
      stats["bytes_in"] += r_.data.size();
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( store->is_locked(r_.pool, key) )
      {
        r.st = status::E_LOCKED;
      }
      else if ( (r.st = store->write_value_range(r_.pool, key, r_.offset, r_.data.bytes())) == status::S_OK )
      {
        touch(r_.pool, r_.key);
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::get_offset_request &r_)
    {
      auto r = reply(wire::opcode::GET_DIRECT_OFFSET);
      engine::value_ref v;
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( write_locked(r_.pool, r_.key) )
      {
        r.st = status::E_LOCKED;
      }
      else if ( (r.st = store->get_value_ref(r_.pool, as_bytes(r_.key), v)) == status::S_OK )
      {
        if ( r_.offset > v.length || r_.length > v.length - r_.offset )
        {
          r.st = status::E_RANGE;
        }
        else
        {
          auto b = arena.view(v.offset + r_.offset, r_.length);
          r.value = wire::payload(byte_vector(b.begin(), b.end()));
        }
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::invoke_ado_request &r_)
    {
      invoke(sid_, s_, rid_, t_, wire::opcode::INVOKE_ADO, r_.pool, r_.key, r_.flags, r_.root_len, r_.request.bytes(), nullptr);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::invoke_put_ado_request &r_)
    {
      stats["bytes_in"] += r_.value.size();
      invoke(sid_, s_, rid_, t_, wire::opcode::INVOKE_PUT_ADO, r_.pool, r_.key, r_.flags, r_.root_len, r_.request.bytes(), &r_.value);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::get_attributes_request &r_)
    {
      auto r = reply(wire::opcode::GET_ATTRIBUTES);
      engine::value_ref v;
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( r_.attr == wire::attribute::item_count )
      {
        r.values.push_back(store->count(r_.pool));
      }
      else if ( (r.st = store->get_value_ref(r_.pool, as_bytes(r_.key), v)) == status::S_OK )
      {
        if ( r_.attr == wire::attribute::value_length )
        {
          r.values.push_back(v.length);
        }
        else if ( r_.attr == wire::attribute::write_timestamp )
        {
          auto it = timestamps.find({r_.pool, r_.key});
          r.values.push_back(it == timestamps.end() ? 0 : it->second);
        }
        else
        {
          r.st = status::E_INVALID;
        }
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &, std::uint64_t rid_, steady_clock::time_point t_, wire::get_statistics_request &)
    {
      auto r = reply(wire::opcode::GET_STATISTICS);
      r.stats = statistics();
      respond(sid_, rid_, std::move(r), t_);
    }

    void handle(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::find_request &r_)
    {
      auto r = reply(wire::opcode::FIND);
      if ( ! holds(s_, r_.pool) )
      {
        r.st = status::E_BAD_POOL;
      }
      else if ( ! pools[r_.pool].index )
      {
        r.st = status::E_NO_INDEX;
      }
      else if ( r_.kind > 2 )
      {
        r.st = status::E_INVALID;
      }
      else
      {
        r.st = pools[r_.pool].index->find(r_.expr, index::match_kind(r_.kind), r_.begin, r.key, r.next_position);
      }
      respond(sid_, rid_, std::move(r), t_);
    }

    std::vector<std::pair<std::string, std::uint64_t>> statistics() const
    {
      std::vector<std::pair<std::string, std::uint64_t>> v(stats.begin(), stats.end());
      v.emplace_back("sessions", sessions.size());
      v.emplace_back("pools_open", std::count_if(pools.begin(), pools.end(), [] (const auto &p) { return p.second.opens > 0; }));
      v.emplace_back("ado_in_flight", works.size());
      return v;
    }

    /* ---- ADO ---- */

    void invoke(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, wire::opcode op_,
                pool_t pool_, const std::string &key_, std::uint32_t flags_, std::uint64_t root_len_,
                byte_span request_, const wire::payload *value_)
    {
      auto fail = [&] (status st_) { respond(sid_, rid_, reply(op_, st_), t_); };
      auto key = as_bytes(key_);
      if ( ! holds(s_, pool_) )
      {
        return fail(status::E_BAD_POOL);
      }
      if ( opts.ado_plugins.empty() )
      {
        return fail(status::E_NOT_SUPPORTED);
      }
      bool detached = value_ && (flags_ & wire::ADO_FLAG_DETACHED);
      if ( value_ && value_->size() > wire::max_direct_value )
      {
        return fail(status::E_TOO_LARGE);
      }
      if ( value_ && ! detached )
      {
        if ( store->is_locked(pool_, key) )
        {
          return fail(status::E_LOCKED);
        }
        engine::value_ref existing;
        bool keep = (flags_ & wire::ADO_FLAG_NO_OVERWRITE) && store->get_value_ref(pool_, key, existing) == status::S_OK;
        if ( ! keep )
        {
          if ( auto st = store->put(pool_, key, value_->bytes()); st != status::S_OK )
          {
            return fail(st);
          }
          index_insert(pool_, key_);
          touch(pool_, key_);
        }
      }

      engine::value_ref root;
      bool created = false;
      if ( auto st = store->lock(pool_, key, lock_type::write, root_len_, root, created); st != status::S_OK )
      {
        return fail(st);
      }
      if ( created )
      {
        index_insert(pool_, key_);
        touch(pool_, key_);
      }

      ado::work_request w;
      w.work_id = next_work++;
      w.key = key_;
      w.values.push_back({root.offset, root.length});
      w.request.assign(request_.begin(), request_.end());
      w.new_root = created;
      if ( detached )
      {
        auto len = value_->size();
        std::uint64_t off = 0;
        if ( len )
        {
          if ( auto st = store->allocate_pool_memory(pool_, len, off); st != status::S_OK )
          {
            store->unlock(pool_, key, lock_type::write);
            return fail(st);
          }
          arena.write(off, value_->bytes());
          arena.persist(off, len);
        }
        w.detached = ado::value_desc{off, len};
      }

      work_state ws{sid_, rid_, pool_, op_, false, {}, {{key_, lock_type::write}}, t_};
      auto id = w.work_id;
      works.emplace(id, std::move(ws));
      s_.parked = true;
      stats["ado_works"]++;
      send_work(pool_, std::move(w));
    }

    /* True when the response is withheld until the signal work completes. */
    bool signal(session_id sid_, session_state &s_, std::uint64_t rid_, steady_clock::time_point t_, pool_t pool_,
                const std::string &key_, std::string_view event_, const wire::response &r_)
    {
      if ( opts.ado_plugins.empty() )
      {
        return false;
      }
      ado::work_request w;
      w.work_id = next_work++;
      w.key = key_;
      w.request = to_bytes(std::string(ado::signal_prefix) + "::" + std::string(event_));
      std::vector<held_lock> locks;
      if ( event_ == "post-put" )
      {
        engine::value_ref v;
        bool created;
        if ( store->lock(pool_, as_bytes(key_), lock_type::read, 0, v, created) != status::S_OK )
        {
          return false;
        }
        w.values.push_back({v.offset, v.length});
        locks.push_back({key_, lock_type::read});
      }
      auto id = w.work_id;
      works.emplace(id, work_state{sid_, rid_, pool_, r_.for_op, true, r_, std::move(locks), t_});
      s_.parked = true;
      stats["ado_signals"]++;
      send_work(pool_, std::move(w));
      return true;
    }

    std::string queue_name(pool_t pool_) const
    {
      return "mcaslite." + opts.label + "." + std::to_string(pool_) + ".uipc";
    }

    status ensure_ado(pool_t pool_)
    {
      auto &p = pools[pool_];
      if ( p.ado )
      {
        return status::S_OK;
      }
      ado_launch l{queue_name(pool_), opts.ado_plugins, opts.ado_path, opts.ado_params, store->pool_regions(pool_)};
      try
      {
        if ( opts.mode == ado_mode::in_process )
        {
          p.ado = make_in_process_link(arena, l, [this, pool_] { service(pool_, false); });
        }
        else
        {
          auto path = arena.get_backend().path();
          if ( path.empty() || opts.ado_exe.empty() )
          {
            throw error(status::E_NOT_SUPPORTED, "ADO processes need a file-backed arena and mcas-ado");
          }
          p.ado = make_process_link(opts.ado_exe, path, l);
        }
        p.last_alive_check = steady_clock::now();
      }
      catch ( const error &e )
      {
        spdlog::error("shard {}: ADO for pool {} unavailable: {}", opts.index, pool_, e.what());
        return status::E_ADO_FAULT;
      }
      return status::S_OK;
    }

    void send_work(pool_t pool_, ado::work_request &&w_)
    {
      if ( ensure_ado(pool_) != status::S_OK )
      {
        complete(w_.work_id, status::E_ADO_FAULT, {});
        return;
      }
      auto &p = pools[pool_];
      p.backlog.push_back(std::move(w_));
      drain_backlog(pool_);
      if ( opts.mode == ado_mode::in_process )
      {
        service(pool_, true);
      }
    }

    void drain_backlog(pool_t pool_)
    {
      auto &p = pools[pool_];
      while ( p.ado && ! p.backlog.empty() && p.inflight < max_ado_inflight )
      {
        if ( p.ado->send(p.backlog.front()) != status::S_OK )
        {
          break;
        }
        p.backlog.pop_front();
        p.inflight++;
      }
    }

    /* Handles every message waiting on the pool's queue. pump_ lets an
       in-process host run; it is false when the host itself is waiting. */
    bool service(pool_t pool_, bool pump_)
    {
      auto it = pools.find(pool_);
      if ( it == pools.end() || ! it->second.ado )
      {
        return false;
      }
      if ( pump_ )
      {
        it->second.ado->pump();
      }
      bool any = false;
      for ( ;; )
      {
        it = pools.find(pool_);
        if ( it == pools.end() || ! it->second.ado )
        {
          break;
        }
        ado::ipc_message m;
        try
        {
          if ( ! it->second.ado->recv(m) )
          {
            break;
          }
        }
        catch ( const error &e )
        {
          spdlog::error("shard {}: pool {} ADO queue: {}", opts.index, pool_, e.what());
          continue;
        }
        any = true;
        handle_ado(pool_, std::move(m));
        if ( pump_ )
        {
          if ( auto p = pools.find(pool_); p != pools.end() && p->second.ado )
          {
            p->second.ado->pump();
          }
        }
      }
      return any;
    }

    void handle_ado(pool_t pool_, ado::ipc_message &&m_)
    {
      if ( auto c = std::get_if<ado::callback_request>(&m_) )
      {
        stats["ado_callbacks"]++;
        if ( auto it = works.find(c->work_id); it == works.end() || it->second.pool != pool_ )
        {
          /* nobody waits for a reply; answering could only fill the queue */
          spdlog::warn("shard {}: callback for unknown work {}", opts.index, c->work_id);
          return;
        }
        auto r = callback(pool_, *c);
        auto &p = pools[pool_];
        while ( p.ado && p.ado->send(r) == status::E_QUEUE_FULL )
        {
          if ( ! p.ado->alive() )
          {
            break;
          }
          std::this_thread::yield();
        }
      }
      else if ( auto w = std::get_if<ado::work_complete>(&m_) )
      {
        auto it = works.find(w->work_id);
        if ( it == works.end() || it->second.pool != pool_ )
        {
          spdlog::warn("shard {}: completion for unknown work {}", opts.index, w->work_id);
          return;
        }
        complete(w->work_id, w->st, std::move(w->responses));
      }
    }

    void complete(std::uint64_t work_id_, status st_, std::vector<wire::ado_buffer> &&responses_)
    {
      auto it = works.find(work_id_);
      if ( it == works.end() )
      {
        return;
      }
      auto w = std::move(it->second);
      works.erase(it);
      for ( const auto &l : w.locks )
      {
        store->unlock(w.pool, as_bytes(l.key), l.type);
      }
      if ( auto p = pools.find(w.pool); p != pools.end() )
      {
        auto &ps = p->second;
        auto queued = std::find_if(ps.backlog.begin(), ps.backlog.end(), [&] (const auto &b) { return b.work_id == work_id_; });
        if ( queued != ps.backlog.end() )
        {
          ps.backlog.erase(queued);
        }
        else if ( ps.inflight )
        {
          ps.inflight--;
        }
        drain_backlog(w.pool);
      }
      if ( st_ == status::E_ADO_FAULT )
      {
        stats["ado_faults"]++;
      }
      if ( w.signal )
      {
        if ( st_ != status::S_OK )
        {
          spdlog::warn("shard {}: signal work {} ended with {}", opts.index, work_id_, status_name(st_));
        }
        respond(w.session, w.request_id, std::move(w.signal_response), w.start);
      }
      else
      {
        auto r = reply(w.op, st_);
        if ( st_ == status::S_OK )
        {
          for ( const auto &b : responses_ )
          {
            stats["bytes_out"] += b.data.size();
          }
          r.ado = std::move(responses_);
        }
        respond(w.session, w.request_id, std::move(r), w.start);
      }
      unpark(w.session);
    }

    /* The ADO process died or its queue broke: fail everything it owed. */
    void fail_ado(pool_t pool_)
    {
      auto &p = pools[pool_];
      spdlog::error("shard {}: ADO for pool {} is down", opts.index, pool_);
      p.ado.reset();
      p.inflight = 0;
      p.backlog.clear();
      std::vector<std::uint64_t> ids;
      for ( const auto &[id, w] : works )
      {
        if ( w.pool == pool_ )
        {
          ids.push_back(id);
        }
      }
      for ( auto id : ids )
      {
        complete(id, status::E_ADO_FAULT, {});
      }
    }

    ado::callback_reply callback(pool_t pool_, const ado::callback_request &c_)
    {
      ado::callback_reply r;
      r.work_id = c_.work_id;
      auto it = works.find(c_.work_id);
      if ( it == works.end() || it->second.pool != pool_ )
      {
        r.st = status::E_INVALID;
        return r;
      }
      auto &w = it->second;
      auto key = as_bytes(c_.key);
      auto held = std::find_if(w.locks.begin(), w.locks.end(), [&] (const held_lock &l) { return l.key == c_.key; });

      auto lock_key = [&] (std::uint64_t create_size_) {
        engine::value_ref v;
        bool created = false;
        if ( c_.key.empty() )
        {
          r.st = status::E_INVALID;
          return;
        }
        if ( held != w.locks.end() )
        {
          r.st = store->get_pinned_ref(pool_, key, v);
        }
        else if ( (r.st = store->lock(pool_, key, lock_type::write, create_size_, v, created)) == status::S_OK )
        {
          w.locks.push_back({c_.key, lock_type::write});
          if ( created )
          {
            index_insert(pool_, c_.key);
            touch(pool_, c_.key);
          }
        }
        r.a = v.offset;
        r.b = v.length;
        r.c = created;
      };

      switch ( c_.kind )
      {
      case ado::callback_kind::create_key:
        if ( c_.a == 0 )
        {
          r.st = status::E_INVALID;
          break;
        }
        lock_key(c_.a);
        break;
      case ado::callback_kind::open_key:
        lock_key(0);
        break;
      case ado::callback_kind::erase_key:
        if ( held != w.locks.end() )
        {
          store->unlock(pool_, key, held->type);
          w.locks.erase(held);
        }
        else if ( store->is_locked(pool_, key) )
        {
          r.st = status::E_LOCKED;
          break;
        }
        if ( (r.st = store->erase(pool_, key)) == status::S_OK )
        {
          index_erase(pool_, c_.key);
          forget(pool_, c_.key);
        }
        break;
      case ado::callback_kind::resize_value:
      {
        if ( held == w.locks.end() ? store->is_locked(pool_, key) : held->type != lock_type::write )
        {
          r.st = status::E_LOCKED;
          break;
        }
        engine::value_ref v;
        if ( (r.st = store->resize_value(pool_, key, c_.a)) == status::S_OK &&
             (r.st = store->get_pinned_ref(pool_, key, v)) == status::S_OK )
        {
          touch(pool_, c_.key);
          r.a = v.offset;
          r.b = v.length;
        }
        break;
      }
      case ado::callback_kind::allocate_memory:
        r.st = c_.a == 0 ? status::E_INVALID : store->allocate_pool_memory(pool_, c_.a, r.a);
        break;
      case ado::callback_kind::free_memory:
        r.st = store->free_pool_memory(pool_, c_.a, c_.b);
        break;
      case ado::callback_kind::get_ref_vector:
        r.st = store->iterate(pool_, [&] (byte_span k, engine::value_ref v) {
          r.refs.push_back({to_string(k), {v.offset, v.length}});
        });
        break;
      case ado::callback_kind::iterate:
      {
        std::vector<ado::key_ref> all;
        r.st = store->iterate(pool_, [&] (byte_span k, engine::value_ref v) {
          all.push_back({to_string(k), {v.offset, v.length}});
        });
        std::sort(all.begin(), all.end(), [] (const auto &a, const auto &b) { return a.key < b.key; });
        auto first = std::min<std::uint64_t>(c_.a, all.size());
        auto last = c_.b == 0 ? all.size() : std::min<std::uint64_t>(all.size(), first + c_.b);
        r.refs.assign(all.begin() + first, all.begin() + last);
        r.a = last;
        break;
      }
      case ado::callback_kind::find_key:
      {
        auto &p = pools[pool_];
        if ( ! p.index )
        {
          r.st = status::E_NO_INDEX;
        }
        else if ( c_.match > 2 )
        {
          r.st = status::E_INVALID;
        }
        else
        {
          r.st = p.index->find(c_.key, index::match_kind(c_.match), c_.a, r.key, r.a);
        }
        break;
      }
      case ado::callback_kind::get_pool_info:
      {
        engine::pool_info info;
        if ( (r.st = store->get_pool_info(pool_, info)) == status::S_OK )
        {
          r.a = info.size;
          r.b = info.free_bytes;
          r.c = info.item_count;
        }
        break;
      }
      case ado::callback_kind::unlock:
        if ( held == w.locks.end() || held == w.locks.begin() )
        {
          /* the invoke target stays locked until the work completes */
          r.st = status::E_INVALID;
        }
        else
        {
          r.st = store->unlock(pool_, key, held->type);
          w.locks.erase(held);
        }
        break;
      default:
        r.st = status::E_INVALID;
      }
      return r;
    }

    bool poll()
    {
      bool any = false;
      std::vector<pool_t> ids;
      for ( const auto &[id, p] : pools )
      {
        if ( p.ado )
        {
          ids.push_back(id);
        }
      }
      auto now = steady_clock::now();
      for ( auto id : ids )
      {
        any |= service(id, true);
        auto it = pools.find(id);
        if ( it == pools.end() || ! it->second.ado )
        {
          continue;
        }
        auto &p = it->second;
        if ( p.inflight && now - p.last_alive_check > milliseconds(5) )
        {
          p.last_alive_check = now;
          if ( ! p.ado->alive() )
          {
            /* messages sent just before exiting still count */
            service(id, false);
            fail_ado(id);
            any = true;
          }
        }
      }
      return any;
    }

    std::string lock_audit() const
    {
      std::map<std::pair<pool_t, std::string>, std::pair<std::uint32_t, bool>> expect;
      for ( const auto &[id, w] : works )
      {
        for ( const auto &l : w.locks )
        {
          auto &e = expect[{w.pool, l.key}];
          if ( l.type == lock_type::write )
          {
            e.second = true;
          }
          else
          {
            e.first++;
          }
        }
      }
      std::string out;
      auto actual = store->locks();
      for ( const auto &l : actual )
      {
        auto it = expect.find({l.pool, l.key});
        if ( it == expect.end() )
        {
          out += "orphan lock on '" + l.key + "'; ";
        }
        else if ( it->second != std::make_pair(l.readers, l.writer) )
        {
          out += "lock mode mismatch on '" + l.key + "'; ";
        }
      }
      if ( actual.size() != expect.size() )
      {
        out += "expected " + std::to_string(expect.size()) + " locks, found " + std::to_string(actual.size());
      }
      return out;
    }
  };

  shard::shard(pmem::persistent_arena &arena_, shard_options options_, shard_hooks hooks_)
    : _impl(std::make_unique<impl>(arena_, std::move(options_), std::move(hooks_)))
  {}

  shard::~shard() = default;

  void shard::open_session(session_id id_)
  {
    _impl->check_thread();
    _impl->sessions[id_];
  }

  void shard::close_session(session_id id_)
  {
    _impl->check_thread();
    auto it = _impl->sessions.find(id_);
    if ( it == _impl->sessions.end() )
    {
      return;
    }
    auto pools = it->second.pools;
    for ( const auto &[pool, count] : pools )
    {
      _impl->closed(it->second, pool, count);
    }
    _impl->sessions.erase(it);
  }

  void shard::submit(session_id id_, wire::message &&m_)
  {
    _impl->check_thread();
    auto &s = _impl->sessions[id_];
    if ( s.parked )
    {
      s.queued.push_back(std::move(m_));
      return;
    }
    _impl->execute(id_, s, std::move(m_));
  }

  bool shard::poll()
  {
    _impl->check_thread();
    return _impl->poll();
  }

  std::size_t shard::works_in_flight() const noexcept
  {
    return _impl->works.size();
  }

  engine::kvstore &shard::store() noexcept
  {
    return *_impl->store;
  }

  std::string shard::lock_audit() const
  {
    return _impl->lock_audit();
  }

  void shard::on_ado_bytes(engine::pool_t pool_, byte_span bytes_)
  {
    ado::ipc_message m;
    if ( ado::decode(bytes_, m) == status::S_OK )
    {
      _impl->handle_ado(pool_, std::move(m));
    }
  }

  std::vector<std::pair<std::string, std::uint64_t>> shard::statistics() const
  {
    return _impl->statistics();
  }
}
