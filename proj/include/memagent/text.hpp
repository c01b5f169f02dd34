#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace memagent {

// Splits on Unicode whitespace (ASCII spaces/controls, NBSP, U+2000..U+200A,
// line/paragraph separators, ideographic space...). Input is UTF-8; invalid
// sequences are passed through as token bytes.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end);

// Number of UTF-8 code points.
std::size_t char_count(std::string_view text);

// Lowercases ASCII, deletes ASCII punctuation, splits on whitespace.
// This is the tokenization shared by the metrics, the extractive answerer
// and the hashed bag-of-words embedder.
std::vector<std::string> normalized_words(std::string_view text);

// The fixed 50-word stopword list.
bool is_stopword(std::string_view word);

// Splits on '.', '!' and '?'; each sentence keeps its terminator and is trimmed.
// Empty sentences are dropped.
std::vector<std::string> split_sentences(std::string_view text);

std::string trim(std::string_view text);

}  // namespace memagent
