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

/* Writes the golden-frame corpus: golden_gen <path>. */
#include "support/golden_messages.h"

#include <fstream>
#include <iostream>

int main(int argc, char **argv)
{
  if ( argc != 2 )
  {
    std::cerr << "usage: golden_gen <frames.json>\n";
    return 2;
  }
  std::ofstream(argv[1]) << mcaslite::test::golden_document().dump(2) << "\n";
}
