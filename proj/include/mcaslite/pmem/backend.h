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

#ifndef MCASLITE_PMEM_BACKEND_H
#define MCASLITE_PMEM_BACKEND_H

#include <mcaslite/common/bytes.h>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace mcaslite::pmem
{
  constexpr std::uint64_t cache_line = 64;

  /* Byte space with an explicit persistence boundary. All mutation goes through
     write/fill/store64 so that a crash-simulating backend can see it; readers may
     use data() directly. */
  class backend
  {
  public:
    virtual ~backend() = default;

    virtual const std::byte *data() const noexcept = 0;
    /* Direct access for out-of-band writers (ADO mappings). Bypasses crash tracking. */
    virtual std::byte *raw() noexcept = 0;
    virtual std::uint64_t capacity() const noexcept = 0;

    virtual void write(std::uint64_t offset, byte_span src) = 0;
    virtual void fill(std::uint64_t offset, std::uint64_t length, std::byte value) = 0;
    virtual void persist(std::uint64_t offset, std::uint64_t length) = 0;

    /* Path of the backing file, empty for anonymous memory. */
    virtual std::string path() const { return {}; }
  };

  /* Memory-mapped file (fs-DAX style). persist() issues msync unless disabled. */
  class mapped_file_backend : public backend
  {
  public:
    /* capacity == 0 adopts the size of an existing file. */
    mapped_file_backend(const std::string &path, std::uint64_t capacity, std::uint64_t addr_hint = 0, bool sync = true);
    mapped_file_backend(const mapped_file_backend &) = delete;
    mapped_file_backend &operator=(const mapped_file_backend &) = delete;
    ~mapped_file_backend() override;

    const std::byte *data() const noexcept override { return _base; }
    std::byte *raw() noexcept override { return _base; }
    std::uint64_t capacity() const noexcept override { return _capacity; }
    void write(std::uint64_t offset, byte_span src) override;
    void fill(std::uint64_t offset, std::uint64_t length, std::byte value) override;
    void persist(std::uint64_t offset, std::uint64_t length) override;
    std::string path() const override { return _path; }

  private:
    std::string _path;
    int _fd = -1;
    std::byte *_base = nullptr;
    std::uint64_t _capacity = 0;
    bool _sync;
  };

  /* Thrown from a flush hook to model power loss at a flush point. */
  struct simulated_crash
  {
    std::uint64_t flush_index;
  };

  /* Anonymous memory that tracks dirty 64-byte lines. A crash keeps the persisted
     image plus any chosen subset of the pending (written, unflushed) lines. */
  class crash_sim_backend : public backend
  {
  public:
    explicit crash_sim_backend(std::uint64_t capacity);
    crash_sim_backend(const crash_sim_backend &) = delete;
    crash_sim_backend &operator=(const crash_sim_backend &) = delete;
    ~crash_sim_backend() override;

    const std::byte *data() const noexcept override { return _base; }
    std::byte *raw() noexcept override { return _base; }
    std::uint64_t capacity() const noexcept override { return _capacity; }
    void write(std::uint64_t offset, byte_span src) override;
    void fill(std::uint64_t offset, std::uint64_t length, std::byte value) override;
    void persist(std::uint64_t offset, std::uint64_t length) override;

    std::vector<std::uint64_t> pending_lines() const;
    std::size_t pending_count() const noexcept { return _pending.size(); }
    std::uint64_t flush_count() const noexcept { return _flushes; }

    /* Called at the start of every persist() with the flush ordinal; may throw
       simulated_crash, in which case the flush does not take effect. */
    void set_flush_hook(std::function<void(std::uint64_t)> hook) { _hook = std::move(hook); }
    /* Convenience hook: throw simulated_crash at flush ordinal n. */
    void crash_at_flush(std::uint64_t n);
    void clear_flush_hook() { _hook = nullptr; }

    /* Materialize a post-crash image in place: pending lines for which keep(line)
       is false revert to their persisted contents. Clears the pending set. */
    void crash(const std::function<bool(std::uint64_t line)> &keep);
    void crash_drop_all();
    void crash_random(std::mt19937_64 &rng, double keep_probability = 0.5);

  private:
    using line_image = std::array<std::byte, cache_line>;
    void touch(std::uint64_t line);

    std::byte *_base = nullptr;
    std::uint64_t _capacity = 0;
    std::unordered_map<std::uint64_t, line_image> _pending;
    std::function<void(std::uint64_t)> _hook;
    std::uint64_t _flushes = 0;
  };
}

#endif
