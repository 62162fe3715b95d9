#include "talknet/models/networks.hpp"

namespace talknet::models {

TokenBatch TokenBatch::from(const std::vector<text::TokenSeq>& seqs) {
  std::vector<std::size_t> lengths;
  for (const auto& s : seqs) lengths.push_back(s.ids.size());
  TokenBatch b;
  b.layout = nn::Layout::of(lengths);
  b.ids.assign(b.layout.columns(), text::kBlankId);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    std::copy(seqs[i].ids.begin(), seqs[i].ids.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(i * b.layout.max_len));
  }
  return b;
}

template class DurationModel<float>;
template class DurationModel<double>;
template class PitchModel<float>;
template class PitchModel<double>;
template class MelModel<float>;
template class MelModel<double>;

}  // namespace talknet::models
