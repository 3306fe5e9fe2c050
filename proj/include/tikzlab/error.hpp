#pragma once

#include <stdexcept>
#include <string>

namespace tikzlab {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TIKZLAB_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// corpus
TIKZLAB_DEFINE_ERROR(CycleDetected);
TIKZLAB_DEFINE_ERROR(MalformedProject);
TIKZLAB_DEFINE_ERROR(RuleFileError);

// compiler
TIKZLAB_DEFINE_ERROR(EngineMissing);
TIKZLAB_DEFINE_ERROR(ConverterMissing);
TIKZLAB_DEFINE_ERROR(CorruptPdf);
TIKZLAB_DEFINE_ERROR(CompilerUnavailable);

// shared numeric / argument errors
TIKZLAB_DEFINE_ERROR(DimensionMismatch);
TIKZLAB_DEFINE_ERROR(InvalidArgument);
TIKZLAB_DEFINE_ERROR(EmptyInput);
TIKZLAB_DEFINE_ERROR(ZeroVector);
TIKZLAB_DEFINE_ERROR(TooFewSamples);
TIKZLAB_DEFINE_ERROR(EmptyCorpus);
TIKZLAB_DEFINE_ERROR(NoNGrams);
TIKZLAB_DEFINE_ERROR(EmptyGroup);

// metrics / embedder
TIKZLAB_DEFINE_ERROR(MissingAlignment);
TIKZLAB_DEFINE_ERROR(EmbedderUnavailable);
TIKZLAB_DEFINE_ERROR(ProtocolError);

// bws
TIKZLAB_DEFINE_ERROR(InvalidRecord);
TIKZLAB_DEFINE_ERROR(Unsplittable);
TIKZLAB_DEFINE_ERROR(LengthMismatch);
TIKZLAB_DEFINE_ERROR(DegenerateInput);
TIKZLAB_DEFINE_ERROR(DegenerateRange);

// cli
TIKZLAB_DEFINE_ERROR(ConfigInvalid);
TIKZLAB_DEFINE_ERROR(UnknownSubcommand);

#undef TIKZLAB_DEFINE_ERROR

}  // namespace tikzlab
