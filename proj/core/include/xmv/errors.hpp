#pragma once

#include <stdexcept>
#include <string>

namespace xmv {

// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorClass {
    Input,      // malformed or missing data files
    Config,     // configuration, templates, paths
    Transport,  // network / timeout
    Parse,      // model output that cannot be interpreted
    Case,       // a pipeline case that failed after policy
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

#define XMV_DEFINE_ERROR(Name, Class)                                              \
    class Name : public Error {                                                    \
    public:                                                                        \
        explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {} \
    }

// artifacts
XMV_DEFINE_ERROR(IoError, Input);
XMV_DEFINE_ERROR(SchemaError, Input);
XMV_DEFINE_ERROR(ValueError, Input);
XMV_DEFINE_ERROR(DegenerateError, Input);

// prompts / config
XMV_DEFINE_ERROR(MissingPlaceholder, Config);
XMV_DEFINE_ERROR(TemplateError, Config);
XMV_DEFINE_ERROR(ConfigError, Config);

// gateway
XMV_DEFINE_ERROR(TransportError, Transport);
XMV_DEFINE_ERROR(BackendError, Case);
XMV_DEFINE_ERROR(EmptyGeneration, Case);

// verdicts
XMV_DEFINE_ERROR(ParseError, Parse);

// mutation
XMV_DEFINE_ERROR(InapplicableOperator, Input);

// metrics
XMV_DEFINE_ERROR(EmptyText, Input);
XMV_DEFINE_ERROR(TooShort, Input);
XMV_DEFINE_ERROR(InvalidLogprob, Input);
XMV_DEFINE_ERROR(DomainError, Input);
XMV_DEFINE_ERROR(SingleClassError, Input);
XMV_DEFINE_ERROR(TooFewSamples, Input);

// reporting
XMV_DEFINE_ERROR(MissingLabels, Input);
XMV_DEFINE_ERROR(EmptyCorpus, Input);

#undef XMV_DEFINE_ERROR

}  // namespace xmv
