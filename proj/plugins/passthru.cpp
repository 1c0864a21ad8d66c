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

#include <mcaslite/plugins/builtins.h>

namespace mcaslite::plugins
{
  namespace
  {
    /* Echoes the request; performs no compute. */
    class passthru : public ado::plugin
    {
    public:
      status do_work(const ado::work &w_, ado::services &, ado::pool_memory &, std::vector<byte_vector> &responses_) override
      {
        if ( as_string_view(w_.request).starts_with(ado::signal_prefix) )
        {
          return status::S_OK;
        }
        responses_.emplace_back(w_.request.begin(), w_.request.end());
        return status::S_OK;
      }
    };
  }

  std::unique_ptr<ado::plugin> make_passthru(const ado::plugin_params &)
  {
    return std::make_unique<passthru>();
  }
}

#ifdef MCASLITE_PLUGIN_MODULE
extern "C" mcaslite::ado::plugin *mcaslite_ado_plugin_create(const mcaslite::ado::plugin_params *params)
{
  return mcaslite::plugins::make_passthru(*params).release();
}
#endif
