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

#include <mcaslite/status.h>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace mcaslite::pmem
{
  namespace
  {
    const std::uint64_t page_size = std::uint64_t(::sysconf(_SC_PAGESIZE));

    void check_range(std::uint64_t offset, std::uint64_t length, std::uint64_t capacity)
    {
      if ( offset > capacity || length > capacity - offset )
      {
        throw error(status::E_RANGE, "range " + std::to_string(offset) + "+" + std::to_string(length) + " exceeds capacity " + std::to_string(capacity));
      }
    }

    bool all_equal(const std::byte *p, std::uint64_t n, std::byte v)
    {
      return std::all_of(p, p + n, [v] (std::byte b) { return b == v; });
    }
  }

  mapped_file_backend::mapped_file_backend(const std::string &path_, std::uint64_t capacity_, std::uint64_t addr_hint_, bool sync_)
    : _path(path_)
    , _sync(sync_)
  {
    _fd = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if ( _fd < 0 )
    {
      throw error(status::E_MAP_FAIL, "open " + path_ + ": " + std::strerror(errno));
    }
    struct stat st{};
    ::fstat(_fd, &st);
    auto existing = std::uint64_t(st.st_size);
    _capacity = capacity_ == 0 ? existing : capacity_;
    if ( _capacity == 0 )
    {
      ::close(_fd);
      throw error(status::E_BAD_CAPACITY, "no capacity for new file " + path_);
    }
    if ( existing < _capacity && ::ftruncate(_fd, off_t(_capacity)) != 0 )
    {
      ::close(_fd);
      throw error(status::E_MAP_FAIL, "ftruncate " + path_ + ": " + std::strerror(errno));
    }
    /* the "addr" hint is advisory; correctness never depends on placement */
    auto p = ::mmap(reinterpret_cast<void *>(addr_hint_), _capacity, PROT_READ | PROT_WRITE, MAP_SHARED, _fd, 0);
    if ( p == MAP_FAILED )
    {
      ::close(_fd);
      throw error(status::E_MAP_FAIL, "mmap " + path_ + ": " + std::strerror(errno));
    }
    _base = static_cast<std::byte *>(p);
  }

  mapped_file_backend::~mapped_file_backend()
  {
    if ( _base )
    {
      ::munmap(_base, _capacity);
    }
    if ( _fd >= 0 )
    {
      ::close(_fd);
    }
  }

  void mapped_file_backend::write(std::uint64_t offset_, byte_span src_)
  {
    check_range(offset_, src_.size(), _capacity);
    std::memcpy(_base + offset_, src_.data(), src_.size());
  }

  void mapped_file_backend::fill(std::uint64_t offset_, std::uint64_t length_, std::byte value_)
  {
    check_range(offset_, length_, _capacity);
    /* skip pages already holding the value so sparse files stay sparse */
    auto end = offset_ + length_;
    for ( auto p = offset_; p < end; )
    {
      auto n = std::min(end, round_down(p, page_size) + page_size) - p;
      if ( ! all_equal(_base + p, n, value_) )
      {
        std::memset(_base + p, std::to_integer<int>(value_), n);
      }
      p += n;
    }
  }

  void mapped_file_backend::persist(std::uint64_t offset_, std::uint64_t length_)
  {
    check_range(offset_, length_, _capacity);
    if ( _sync && length_ != 0 )
    {
      auto first = round_down(offset_, page_size);
      auto last = round_up(offset_ + length_, page_size);
      ::msync(_base + first, last - first, MS_SYNC);
    }
  }

  crash_sim_backend::crash_sim_backend(std::uint64_t capacity_)
    : _capacity(capacity_)
  {
    auto p = ::mmap(nullptr, _capacity, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if ( p == MAP_FAILED )
    {
      throw error(status::E_MAP_FAIL, std::string("anonymous mmap: ") + std::strerror(errno));
    }
    _base = static_cast<std::byte *>(p);
  }

  crash_sim_backend::~crash_sim_backend()
  {
    ::munmap(_base, _capacity);
  }

  void crash_sim_backend::touch(std::uint64_t line_)
  {
    if ( ! _pending.contains(line_) )
    {
      line_image img;
      std::memcpy(img.data(), _base + line_ * cache_line, cache_line);
      _pending.emplace(line_, img);
    }
  }

  void crash_sim_backend::write(std::uint64_t offset_, byte_span src_)
  {
    check_range(offset_, src_.size(), _capacity);
    auto end = offset_ + src_.size();
    for ( auto p = offset_; p < end; )
    {
      auto line = p / cache_line;
      auto n = std::min(end, (line + 1) * cache_line) - p;
      const auto *s = src_.data() + (p - offset_);
      if ( std::memcmp(_base + p, s, n) != 0 )
      {
        touch(line);
        std::memcpy(_base + p, s, n);
      }
      p += n;
    }
  }

  void crash_sim_backend::fill(std::uint64_t offset_, std::uint64_t length_, std::byte value_)
  {
    check_range(offset_, length_, _capacity);
    auto end = offset_ + length_;
    for ( auto p = offset_; p < end; )
    {
      auto line = p / cache_line;
      auto n = std::min(end, (line + 1) * cache_line) - p;
      if ( ! all_equal(_base + p, n, value_) )
      {
        touch(line);
        std::memset(_base + p, std::to_integer<int>(value_), n);
      }
      p += n;
    }
  }

  void crash_sim_backend::persist(std::uint64_t offset_, std::uint64_t length_)
  {
    check_range(offset_, length_, _capacity);
    auto ordinal = _flushes++;
    if ( _hook )
    {
      _hook(ordinal);
    }
    if ( length_ == 0 || _pending.empty() )
    {
      return;
    }
    auto first = offset_ / cache_line;
    auto last = (offset_ + length_ - 1) / cache_line;
    if ( last - first + 1 > _pending.size() )
    {
      std::erase_if(_pending, [first, last] (const auto &kv) { return kv.first >= first && kv.first <= last; });
    }
    else
    {
      for ( auto l = first; l <= last; ++l )
      {
        _pending.erase(l);
      }
    }
  }

  std::vector<std::uint64_t> crash_sim_backend::pending_lines() const
  {
    std::vector<std::uint64_t> v;
    v.reserve(_pending.size());
    for ( const auto &kv : _pending )
    {
      v.push_back(kv.first);
    }
    std::sort(v.begin(), v.end());
    return v;
  }

  void crash_sim_backend::crash_at_flush(std::uint64_t n_)
  {
    _hook = [n_] (std::uint64_t ordinal) {
      if ( ordinal == n_ )
      {
        throw simulated_crash{ordinal};
      }
    };
  }

  void crash_sim_backend::crash(const std::function<bool(std::uint64_t)> &keep_)
  {
    for ( const auto &[line, img] : _pending )
    {
      if ( ! keep_(line) )
      {
        std::memcpy(_base + line * cache_line, img.data(), cache_line);
      }
    }
    _pending.clear();
    _hook = nullptr;
  }

  void crash_sim_backend::crash_drop_all()
  {
    crash([] (std::uint64_t) { return false; });
  }

  void crash_sim_backend::crash_random(std::mt19937_64 &rng_, double keep_probability_)
  {
    std::bernoulli_distribution keep(keep_probability_);
    /* iterate in line order so the outcome depends only on the rng seed */
    auto lines = pending_lines();
    std::unordered_map<std::uint64_t, bool> decision;
    for ( auto l : lines )
    {
      decision[l] = keep(rng_);
    }
    crash([&decision] (std::uint64_t l) { return decision.at(l); });
  }
}
