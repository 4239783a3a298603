#pragma once

#include "pmhom/corpus.hpp"
#include "pmhom/document.hpp"
#include "pmhom/flows.hpp"
#include "pmhom/parametrize.hpp"
#include "pmhom/pipeline.hpp"
#include "pmhom/report.hpp"
#include "pmhom/suite.hpp"
