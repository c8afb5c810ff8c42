#pragma once

#define METASPIKE_VERSION "0.1.0"
