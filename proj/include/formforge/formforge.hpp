#pragma once

#include "formforge/common.hpp"
#include "formforge/html.hpp"
#include "formforge/pruner.hpp"
#include "formforge/selector.hpp"
#include "formforge/extractor.hpp"
#include "formforge/gateway.hpp"
#include "formforge/context.hpp"
#include "formforge/prompt.hpp"
#include "formforge/cassette.hpp"
#include "formforge/http_provider.hpp"
#include "formforge/form_model.hpp"
#include "formforge/engine.hpp"
#include "formforge/webdriver.hpp"
#include "formforge/trial.hpp"
#include "formforge/stats.hpp"
#include "formforge/evaluator.hpp"
#include "formforge/report.hpp"
#include "formforge/pipeline.hpp"
