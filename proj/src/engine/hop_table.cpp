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

#include <bit>
#include <cstring>

namespace mcaslite::engine
{
  namespace
  {
    constexpr std::uint64_t r_segment_count = 0;
    constexpr std::uint64_t r_first_segment = 8;
    constexpr std::uint64_t r_base_size = 16;
    constexpr std::uint64_t r_item_count = 24;
    constexpr std::uint64_t r_expanding = 32;

    constexpr std::uint64_t s_index = 0;
    constexpr std::uint64_t s_buckets = 8;
    constexpr std::uint64_t s_next = 16;
    constexpr std::uint64_t segment_header = 64;

    constexpr std::uint64_t bit(std::uint64_t i) noexcept { return std::uint64_t(1) << i; }

    field_bytes inline_field(byte_span d)
    {
      field_bytes f{};
      std::memcpy(f.data(), d.data(), d.size());
      f[inline_capacity] = std::byte(d.size());
      return f;
    }

    field_bytes remote_field(std::uint64_t offset, std::uint64_t length)
    {
      field_bytes f{};
      store_le(f.data(), offset);
      store_le(f.data() + 8, length);
      return f;
    }

    /* Runs a transaction body; rolls back on failure. */
    template <typename F>
      status transact(table_memory &mem, F &&body)
      {
        auto s = body();
        if ( s == status::S_OK )
        {
          mem.commit();
        }
        else
        {
          mem.rollback();
        }
        return s;
      }
  }

#define TRY(expr) do { auto _s = (expr); if ( _s != status::S_OK ) return _s; } while ( 0 )

  bucket_address bucket_of(std::uint64_t hash_, std::uint64_t segment_count_, std::uint64_t base_size_)
  {
    auto total = base_size_ << (segment_count_ - 1);
    auto b = hash_ & (total - 1);
    if ( b < base_size_ )
    {
      return {0, b};
    }
    auto p = std::uint64_t(std::bit_width(b)) - 1;
    return {p - std::uint64_t(std::countr_zero(base_size_)) + 1, b - bit(p)};
  }

  hop_table::hop_table(pmem::persistent_arena &arena_, table_memory &memory_, std::uint64_t root_, hash_function hash_)
    : _arena(arena_)
    , _mem(memory_)
    , _root(root_)
    , _hash(std::move(hash_))
  {}

  std::uint64_t hop_table::root_field(std::uint64_t off_) const
  {
    return _arena.load64(_root + off_);
  }

  std::uint64_t hop_table::base_size() const
  {
    return root_field(r_base_size);
  }

  bool hop_table::expanding() const
  {
    return root_field(r_expanding) != 0;
  }

  std::uint64_t hop_table::count() const
  {
    return root_field(r_item_count);
  }

  status hop_table::format(std::uint64_t base_size_)
  {
    if ( base_size_ < 64 || ! std::has_single_bit(base_size_) )
    {
      return status::E_INVALID;
    }
    auto bytes = segment_header + base_size_ * entry_size;
    std::uint64_t seg;
    auto s = _mem.alloc(bytes, seg);
    if ( s != status::S_OK )
    {
      _mem.rollback();
      return s;
    }
    _arena.fill(seg, bytes, std::byte{0});
    _arena.store64(seg + s_index, 0);
    _arena.store64(seg + s_buckets, base_size_);
    _arena.store64(seg + s_next, 0);
    _arena.persist(seg, bytes);
    _arena.fill(_root, table_root_size, std::byte{0});
    _arena.store64(_root + r_segment_count, 1);
    _arena.store64(_root + r_first_segment, seg);
    _arena.store64(_root + r_base_size, base_size_);
    _arena.persist(_root, table_root_size);
    _mem.commit();
    load_segments();
    return status::S_OK;
  }

  void hop_table::load_segments()
  {
    _segments.clear();
    _total = 0;
    auto n = root_field(r_segment_count);
    auto base = root_field(r_base_size);
    auto seg = root_field(r_first_segment);
    for ( std::uint64_t k = 0; k != n; ++k )
    {
      if ( seg == 0 || _arena.load64(seg + s_index) != k || _arena.load64(seg + s_buckets) != buckets_in_segment(k, base) )
      {
        throw error(status::E_CORRUPT, "segment chain broken at " + std::to_string(k));
      }
      _segments.push_back({seg, buckets_in_segment(k, base)});
      _total += buckets_in_segment(k, base);
      seg = _arena.load64(seg + s_next);
    }
  }

  status hop_table::attach()
  {
    auto base = root_field(r_base_size);
    auto n = root_field(r_segment_count);
    if ( base < 64 || ! std::has_single_bit(base) || n == 0 || n > max_segments )
    {
      return status::E_CORRUPT;
    }
    try
    {
      load_segments();
    }
    catch ( const error &e )
    {
      return e.code();
    }
    return status::S_OK;
  }

  std::uint64_t hop_table::entry_off(std::uint64_t bucket_) const
  {
    auto base = _segments.front().buckets;
    if ( bucket_ < base )
    {
      return _segments[0].header + segment_header + bucket_ * entry_size;
    }
    auto p = std::uint64_t(std::bit_width(bucket_)) - 1;
    auto k = p - std::uint64_t(std::countr_zero(base)) + 1;
    return _segments[k].header + segment_header + (bucket_ - bit(p)) * entry_size;
  }

  std::uint64_t hop_table::hop_info(std::uint64_t bucket_) const
  {
    return _arena.load64(entry_off(bucket_) + off_hop);
  }

  std::uint64_t hop_table::state_word(std::uint64_t bucket_) const
  {
    return _arena.load64(entry_off(bucket_) + off_state);
  }

  byte_span hop_table::key_of(std::uint64_t bucket_) const
  {
    auto e = entry_off(bucket_);
    auto f = _arena.view(e + off_key, 24);
    if ( state_word(bucket_) & flag_key_inline )
    {
      return f.subspan(0, std::to_integer<std::size_t>(f[inline_capacity]));
    }
    return _arena.view(load_le<std::uint64_t>(f.data()), load_le<std::uint64_t>(f.data() + 8));
  }

  value_ref hop_table::value_of(std::uint64_t bucket_) const
  {
    auto e = entry_off(bucket_);
    auto f = _arena.view(e + off_value, 24);
    if ( state_word(bucket_) & flag_value_inline )
    {
      return {e + off_value, std::to_integer<std::uint64_t>(f[inline_capacity])};
    }
    return {load_le<std::uint64_t>(f.data()), load_le<std::uint64_t>(f.data() + 8)};
  }

  std::optional<std::uint64_t> hop_table::find(byte_span key_, std::uint64_t hash_) const
  {
    auto home = hash_ & (_total - 1);
    auto hop = hop_info(home) & hop_mask;
    while ( hop != 0 )
    {
      auto i = std::uint64_t(std::countr_zero(hop));
      hop &= hop - 1;
      auto j = (home + i) & (_total - 1);
      if ( state_of(state_word(j)) == entry_state::COMMITTED )
      {
        auto k = key_of(j);
        if ( k.size() == key_.size() && std::memcmp(k.data(), key_.data(), k.size()) == 0 )
        {
          return j;
        }
      }
    }
    return std::nullopt;
  }

  std::optional<std::uint64_t> hop_table::slot_of(byte_span key_) const
  {
    return find(key_, _hash(key_));
  }

  bool hop_table::contains(byte_span key_) const
  {
    return slot_of(key_).has_value();
  }

  status hop_table::encode_field(byte_span data_, bool &is_inline_, field_bytes &out_)
  {
    if ( is_inline_ && data_.size() <= inline_capacity )
    {
      out_ = inline_field(data_);
      return status::S_OK;
    }
    is_inline_ = false;
    std::uint64_t off;
    TRY(_mem.alloc(data_.size(), off));
    _arena.write(off, data_);
    _arena.persist(off, data_.size());
    out_ = remote_field(off, data_.size());
    return status::S_OK;
  }

  void hop_table::release_field(std::uint64_t entry_, std::uint64_t field_off_, bool is_inline_)
  {
    if ( is_inline_ )
    {
      return;
    }
    auto f = _arena.view(entry_ + field_off_, 24);
    auto off = load_le<std::uint64_t>(f.data());
    auto len = load_le<std::uint64_t>(f.data() + 8);
    if ( len != 0 )
    {
      _mem.release(off, len);
    }
  }

  status hop_table::move_entry(std::uint64_t src_, std::uint64_t dst_, std::uint64_t home_, std::uint64_t old_bit_, std::uint64_t new_bit_)
  {
    return transact(_mem, [&] {
      auto s = entry_off(src_);
      auto d = entry_off(dst_);
      auto h = entry_off(home_);
      TRY(_mem.record(d, entry_size));
      TRY(_mem.record(s, entry_size));
      TRY(_mem.record(h + off_hop, 8));
      byte_vector body(_arena.view(s + off_key, entry_size - off_key).begin(), _arena.view(s + off_key, entry_size - off_key).end());
      auto sw = _arena.load64(s + off_state);
      _arena.write(d + off_key, body);
      _arena.persist(d + off_key, body.size());
      _arena.store64(d + off_state, sw);
      _arena.persist(d + off_state, 8);
      _arena.fill(s + off_state, entry_size - off_state, std::byte{0});
      auto hop = _arena.load64(h + off_hop);
      _arena.store64(h + off_hop, (hop & ~bit(old_bit_)) | bit(new_bit_));
      return status::S_OK;
    });
  }

  status hop_table::make_room(std::uint64_t hash_, std::uint64_t &slot_)
  {
    auto mask = _total - 1;
    auto home = hash_ & mask;
    auto range = std::min(_total, add_range);
    std::uint64_t d = 0;
    while ( d != range && state_of(state_word((home + d) & mask)) != entry_state::FREE )
    {
      ++d;
    }
    if ( d == range )
    {
      return status::E_NEEDS_EXPANSION;
    }
    auto j = (home + d) & mask;
    while ( d >= hop_range )
    {
      bool moved = false;
      for ( std::uint64_t k = hop_range - 1; k != 0 && ! moved; --k )
      {
        auto y = (j - k) & mask;
        auto candidates = hop_info(y) & hop_mask & (bit(k) - 1);
        if ( candidates == 0 )
        {
          continue;
        }
        auto i = std::uint64_t(std::countr_zero(candidates));
        auto src = (y + i) & mask;
        TRY(move_entry(src, j, y, i, k));
        j = src;
        d = (j - home) & mask;
        moved = true;
      }
      if ( ! moved )
      {
        return status::E_NEEDS_EXPANSION;
      }
    }
    slot_ = j;
    return status::S_OK;
  }

  status hop_table::insert(byte_span key_, byte_span value_, std::uint64_t hash_)
  {
    std::uint64_t slot;
    for ( ;; )
    {
      auto s = make_room(hash_, slot);
      if ( s == status::S_OK )
      {
        break;
      }
      if ( s != status::E_NEEDS_EXPANSION )
      {
        return s;
      }
      TRY(expand());
    }

    auto home = hash_ & (_total - 1);
    auto dist = (slot - home) & (_total - 1);
    return transact(_mem, [&] {
      bool key_inline = true, value_inline = true;
      field_bytes kf, vf;
      TRY(encode_field(key_, key_inline, kf));
      TRY(encode_field(value_, value_inline, vf));
      auto e = entry_off(slot);
      auto h = entry_off(home);
      TRY(_mem.record(e, entry_size));
      TRY(_mem.record(h + off_hop, 8));
      TRY(_mem.record(_root + r_item_count, 8));
      auto flags = (key_inline ? flag_key_inline : 0) | (value_inline ? flag_value_inline : 0);
      _arena.write(e + off_key, kf);
      _arena.write(e + off_value, vf);
      _arena.store64(e + off_state, std::uint64_t(entry_state::ALLOCATING) | flags);
      _arena.persist(e + off_state, entry_size - off_state);
      _arena.store64(e + off_state, std::uint64_t(entry_state::COMMITTED) | flags);
      _arena.persist(e + off_state, 8);
      _arena.store64(h + off_hop, _arena.load64(h + off_hop) | bit(dist));
      _arena.store64(_root + r_item_count, root_field(r_item_count) + 1);
      return status::S_OK;
    });
  }

  status hop_table::replace_value(std::uint64_t bucket_, byte_span value_, bool force_remote_)
  {
    return transact(_mem, [&] {
      auto e = entry_off(bucket_);
      auto sw = _arena.load64(e + off_state);
      bool value_inline = ! force_remote_;
      field_bytes vf;
      TRY(encode_field(value_, value_inline, vf));
      TRY(_mem.record(e + off_state, entry_size - off_state));
      release_field(e, off_value, sw & flag_value_inline);
      _arena.write(e + off_value, vf);
      sw = (sw & ~flag_value_inline) | (value_inline ? flag_value_inline : 0);
      _arena.store64(e + off_state, sw);
      return status::S_OK;
    });
  }

  status hop_table::put(byte_span key_, byte_span value_, std::uint32_t flags_)
  {
    if ( key_.empty() )
    {
      return status::E_INVALID;
    }
    if ( value_.size() > max_value_size )
    {
      return status::E_TOO_LARGE;
    }
    auto h = _hash(key_);
    if ( auto j = find(key_, h) )
    {
      if ( flags_ & FLAGS_DONT_OVERWRITE )
      {
        return status::E_ALREADY_EXISTS;
      }
      return replace_value(*j, value_, false);
    }
    return insert(key_, value_, h);
  }

  status hop_table::get(byte_span key_, byte_vector &out_) const
  {
    auto j = slot_of(key_);
    if ( ! j )
    {
      return status::E_KEY_NOT_FOUND;
    }
    auto v = value_of(*j);
    auto bytes = _arena.view(v.offset, v.length);
    out_.assign(bytes.begin(), bytes.end());
    return status::S_OK;
  }

  status hop_table::get_value_ref(byte_span key_, value_ref &out_) const
  {
    auto j = slot_of(key_);
    if ( ! j )
    {
      return status::E_KEY_NOT_FOUND;
    }
    out_ = value_of(*j);
    return status::S_OK;
  }

  status hop_table::erase(byte_span key_)
  {
    auto h = _hash(key_);
    auto j = find(key_, h);
    if ( ! j )
    {
      return status::E_KEY_NOT_FOUND;
    }
    auto home = h & (_total - 1);
    auto dist = (*j - home) & (_total - 1);
    return transact(_mem, [&] {
      auto e = entry_off(*j);
      auto hw = entry_off(home) + off_hop;
      TRY(_mem.record(e, entry_size));
      TRY(_mem.record(hw, 8));
      TRY(_mem.record(_root + r_item_count, 8));
      auto sw = _arena.load64(e + off_state);
      _arena.store64(e + off_state, (sw & ~state_mask) | std::uint64_t(entry_state::DELETING));
      _arena.persist(e + off_state, 8);
      _arena.store64(hw, _arena.load64(hw) & ~bit(dist));
      release_field(e, off_key, sw & flag_key_inline);
      release_field(e, off_value, sw & flag_value_inline);
      _arena.fill(e + off_state, entry_size - off_state, std::byte{0});
      _arena.store64(_root + r_item_count, root_field(r_item_count) - 1);
      return status::S_OK;
    });
  }

  status hop_table::resize_value(byte_span key_, std::uint64_t new_size_)
  {
    if ( new_size_ > max_value_size )
    {
      return status::E_TOO_LARGE;
    }
    auto j = slot_of(key_);
    if ( ! j )
    {
      return status::E_KEY_NOT_FOUND;
    }
    auto v = value_of(*j);
    byte_vector nv(new_size_, std::byte{0});
    auto keep = std::min(new_size_, v.length);
    auto old = _arena.view(v.offset, keep);
    std::copy(old.begin(), old.end(), nv.begin());
    bool was_remote = ! (state_word(*j) & flag_value_inline);
    return replace_value(*j, nv, was_remote && new_size_ != 0);
  }

  status hop_table::write_value_range(byte_span key_, std::uint64_t offset_, byte_span data_)
  {
    auto j = slot_of(key_);
    if ( ! j )
    {
      return status::E_KEY_NOT_FOUND;
    }
    auto v = value_of(*j);
    if ( offset_ > v.length || data_.size() > v.length - offset_ )
    {
      return status::E_RANGE;
    }
    if ( state_word(*j) & flag_value_inline )
    {
      return transact(_mem, [&] {
        TRY(_mem.record(v.offset + offset_, data_.size()));
        _arena.write(v.offset + offset_, data_);
        return status::S_OK;
      });
    }
    _arena.write(v.offset + offset_, data_);
    _arena.persist(v.offset + offset_, data_.size());
    return status::S_OK;
  }

  status hop_table::pin_value(byte_span key_, value_ref &out_)
  {
    auto j = slot_of(key_);
    if ( ! j )
    {
      return status::E_KEY_NOT_FOUND;
    }
    auto v = value_of(*j);
    if ( (state_word(*j) & flag_value_inline) && v.length != 0 )
    {
      byte_vector copy(_arena.view(v.offset, v.length).begin(), _arena.view(v.offset, v.length).end());
      TRY(replace_value(*j, copy, true));
    }
    out_ = value_of(*j);
    return status::S_OK;
  }

  void hop_table::iterate(const kvstore::iterate_fn &fn_) const
  {
    for ( std::uint64_t j = 0; j != _total; ++j )
    {
      if ( state_of(state_word(j)) == entry_state::COMMITTED )
      {
        fn_(key_of(j), value_of(j));
      }
    }
  }

  status hop_table::add_segment()
  {
    if ( _segments.size() == max_segments )
    {
      return status::E_NO_SPACE;
    }
    auto k = _segments.size();
    auto n = buckets_in_segment(k, _segments.front().buckets);
    auto bytes = segment_header + n * entry_size;
    auto s = transact(_mem, [&] {
      std::uint64_t seg;
      TRY(_mem.alloc(bytes, seg));
      _arena.fill(seg, bytes, std::byte{0});
      _arena.store64(seg + s_index, k);
      _arena.store64(seg + s_buckets, n);
      _arena.persist(seg, bytes);
      auto last = _segments.back().header;
      TRY(_mem.record(last + s_next, 8));
      TRY(_mem.record(_root + r_segment_count, 8));
      TRY(_mem.record(_root + r_expanding, 8));
      _arena.store64(last + s_next, seg);
      _arena.store64(_root + r_segment_count, k + 1);
      _arena.store64(_root + r_expanding, 1);
      return status::S_OK;
    });
    if ( s == status::S_OK )
    {
      load_segments();
    }
    return s;
  }

  status hop_table::normalize()
  {
    for ( bool grew = true; grew; )
    {
      grew = false;
      auto mask = _total - 1;
      std::vector<std::uint64_t> hop(_total, 0);
      std::vector<std::uint64_t> misplaced;
      for ( std::uint64_t j = 0; j != _total; ++j )
      {
        if ( state_of(state_word(j)) != entry_state::COMMITTED )
        {
          continue;
        }
        auto home = _hash(key_of(j)) & mask;
        auto d = (j - home) & mask;
        if ( d < hop_range )
        {
          hop[home] |= bit(d);
        }
        else
        {
          misplaced.push_back(j);
        }
      }
      /* hop bitmaps are derived state while expanding: plain persisted stores */
      for ( std::uint64_t b = 0; b != _total; ++b )
      {
        auto e = entry_off(b);
        if ( _arena.load64(e + off_hop) != hop[b] )
        {
          _arena.store64(e + off_hop, hop[b]);
          _arena.persist(e + off_hop, 8);
        }
      }
      for ( auto j : misplaced )
      {
        auto h = _hash(key_of(j));
        std::uint64_t slot;
        auto s = make_room(h, slot);
        if ( s == status::E_NEEDS_EXPANSION )
        {
          TRY(add_segment());
          grew = true;
          break;
        }
        TRY(s);
        auto home = h & mask;
        TRY(transact(_mem, [&] {
          auto src = entry_off(j);
          auto dst = entry_off(slot);
          auto hw = entry_off(home) + off_hop;
          TRY(_mem.record(dst, entry_size));
          TRY(_mem.record(src, entry_size));
          TRY(_mem.record(hw, 8));
          byte_vector body(_arena.view(src + off_key, entry_size - off_key).begin(), _arena.view(src + off_key, entry_size - off_key).end());
          auto sw = _arena.load64(src + off_state);
          _arena.write(dst + off_key, body);
          _arena.store64(dst + off_state, sw);
          _arena.fill(src + off_state, entry_size - off_state, std::byte{0});
          _arena.store64(hw, _arena.load64(hw) | bit((slot - home) & mask));
          return status::S_OK;
        }));
      }
    }
    return transact(_mem, [&] {
      TRY(_mem.record(_root + r_expanding, 8));
      _arena.store64(_root + r_expanding, 0);
      return status::S_OK;
    });
  }

  status hop_table::expand()
  {
    TRY(add_segment());
    return normalize();
  }

  void hop_table::clear_uncommitted()
  {
    for ( std::uint64_t j = 0; j != _total; ++j )
    {
      auto st = state_of(state_word(j));
      if ( st != entry_state::FREE && st != entry_state::COMMITTED )
      {
        auto e = entry_off(j);
        _arena.fill(e + off_state, entry_size - off_state, std::byte{0});
        _arena.persist(e + off_state, entry_size - off_state);
      }
    }
  }

  status hop_table::recover()
  {
    if ( expanding() )
    {
      return normalize();
    }
    return status::S_OK;
  }

  std::vector<recon::live_object> hop_table::live_objects() const
  {
    std::vector<recon::live_object> v;
    for ( const auto &s : _segments )
    {
      v.push_back({s.header, segment_header + s.buckets * entry_size});
    }
    for ( std::uint64_t j = 0; j != _total; ++j )
    {
      auto sw = state_word(j);
      if ( state_of(sw) != entry_state::COMMITTED )
      {
        continue;
      }
      auto e = entry_off(j);
      if ( ! (sw & flag_key_inline) )
      {
        auto f = _arena.view(e + off_key, 16);
        v.push_back({load_le<std::uint64_t>(f.data()), load_le<std::uint64_t>(f.data() + 8)});
      }
      if ( ! (sw & flag_value_inline) )
      {
        auto f = _arena.view(e + off_value, 16);
        if ( load_le<std::uint64_t>(f.data() + 8) != 0 )
        {
          v.push_back({load_le<std::uint64_t>(f.data()), load_le<std::uint64_t>(f.data() + 8)});
        }
      }
    }
    return v;
  }

  std::string hop_table::audit() const
  {
    auto mask = _total - 1;
    std::uint64_t committed = 0;
    for ( std::uint64_t j = 0; j != _total; ++j )
    {
      auto hop = hop_info(j);
      if ( hop & ~hop_mask )
      {
        return "reserved hop bit set at " + std::to_string(j);
      }
      for ( auto bits = hop; bits != 0; bits &= bits - 1 )
      {
        auto t = (j + std::uint64_t(std::countr_zero(bits))) & mask;
        if ( state_of(state_word(t)) != entry_state::COMMITTED )
        {
          return "hop bit of " + std::to_string(j) + " names empty slot " + std::to_string(t);
        }
        if ( (_hash(key_of(t)) & mask) != j )
        {
          return "hop bit of " + std::to_string(j) + " names foreign item at " + std::to_string(t);
        }
      }
      if ( state_of(state_word(j)) == entry_state::COMMITTED )
      {
        ++committed;
        auto home = _hash(key_of(j)) & mask;
        auto d = (j - home) & mask;
        if ( d >= hop_range )
        {
          return "item at " + std::to_string(j) + " is " + std::to_string(d) + " from home";
        }
        if ( ! (hop_info(home) & bit(d)) )
        {
          return "item at " + std::to_string(j) + " missing from hop bitmap of " + std::to_string(home);
        }
      }
    }
    if ( committed != count() )
    {
      return "item count " + std::to_string(count()) + " but " + std::to_string(committed) + " committed";
    }
    if ( expanding() )
    {
      return "expansion flag still set";
    }
    return {};
  }

#undef TRY
}
