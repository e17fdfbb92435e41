#pragma once

#include "thoughtgraph/thought_graph.hpp"

#include <string>
#include <vector>

namespace tgraph {

// Tab-separated, UTF-8, one header line:
//   go_id <TAB> term_name <TAB> gene_symbols <TAB> description
// gene_symbols are space-separated. Any bad row throws a ParseError carrying
// its line number; a repeated go_id is an error too.
std::vector<GeneSetRecord> ingest_dataset(const std::string& path);
std::vector<GeneSetRecord> parse_dataset(std::string_view content);

const GeneSetRecord* find_record(const std::vector<GeneSetRecord>& records, std::string_view id);

// Gene list from "A,B,C" or "A B C".
std::vector<std::string> parse_gene_list(std::string_view text);

} // namespace tgraph
