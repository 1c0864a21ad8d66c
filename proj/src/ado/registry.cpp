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

#include <mcaslite/ado/plugin.h>

#include <dlfcn.h>

#include <filesystem>
#include <mutex>

namespace mcaslite::ado
{
  namespace
  {
    std::map<std::string, plugin_factory> &builtins()
    {
      static std::map<std::string, plugin_factory> m;
      return m;
    }

    std::mutex &builtins_lock()
    {
      static std::mutex m;
      return m;
    }
  }

  void register_builtin(const std::string &name_, plugin_factory f_)
  {
    std::lock_guard g(builtins_lock());
    builtins()[name_] = f_;
  }

  std::string plugin_short_name(const std::string &id_)
  {
    auto n = std::filesystem::path(id_).filename().string();
    for ( std::string_view p : {"libcomponent-adoplugin-", "libmcaslite-ado-"} )
    {
      if ( n.starts_with(p) )
      {
        n = n.substr(p.size());
      }
    }
    if ( n.ends_with(".so") )
    {
      n.resize(n.size() - 3);
    }
    return n;
  }

  std::unique_ptr<plugin> load_plugin(const std::string &id_, const std::string &ado_path_, const plugin_params &params_)
  {
    if ( id_.ends_with(".so") )
    {
      std::filesystem::path p(id_);
      if ( p.is_relative() && ! ado_path_.empty() )
      {
        p = std::filesystem::path(ado_path_) / p;
      }
      if ( std::filesystem::exists(p) )
      {
        auto h = ::dlopen(p.c_str(), RTLD_NOW | RTLD_LOCAL);
        if ( ! h )
        {
          throw error(status::E_CONFIG, std::string("dlopen: ") + ::dlerror());
        }
        auto f = reinterpret_cast<mcaslite_ado_plugin_create_fn>(::dlsym(h, "mcaslite_ado_plugin_create"));
        if ( ! f )
        {
          throw error(status::E_CONFIG, p.string() + " does not export mcaslite_ado_plugin_create");
        }
        /* the module stays loaded for the life of the process */
        return std::unique_ptr<plugin>(f(&params_));
      }
    }
    std::lock_guard g(builtins_lock());
    auto it = builtins().find(plugin_short_name(id_));
    if ( it == builtins().end() )
    {
      throw error(status::E_CONFIG, "no ADO plugin '" + id_ + "'");
    }
    return it->second(params_);
  }
}
