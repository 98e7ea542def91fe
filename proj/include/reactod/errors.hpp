// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace reactod
{

/// Base of every error raised by the library.
class Error: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

#define REACTOD_DEFINE_ERROR(Name)          \
    class Name: public Error                \
    {                                       \
      public:                               \
        using Error::Error;                 \
    }

REACTOD_DEFINE_ERROR(ParseError);
REACTOD_DEFINE_ERROR(InvariantError);
REACTOD_DEFINE_ERROR(MissingAnnotation);
REACTOD_DEFINE_ERROR(UnknownIntent);
REACTOD_DEFINE_ERROR(UnknownDomain);
REACTOD_DEFINE_ERROR(InvalidArgument);
REACTOD_DEFINE_ERROR(InternalFault);
REACTOD_DEFINE_ERROR(ParseFailure);
REACTOD_DEFINE_ERROR(SplitListMissing);
REACTOD_DEFINE_ERROR(AlignmentError);
REACTOD_DEFINE_ERROR(EmptyInput);

// Backend failures.
REACTOD_DEFINE_ERROR(BackendError);

class TransportError: public BackendError
{
  public:
    using BackendError::BackendError;
};

class ContractError: public BackendError
{
  public:
    using BackendError::BackendError;
};

class ScriptExhausted: public BackendError
{
  public:
    using BackendError::BackendError;
};

#undef REACTOD_DEFINE_ERROR

} // namespace reactod
