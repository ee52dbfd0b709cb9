#!/usr/bin/env node
/**
 * Echo worker entry point.  Attach it to the engine with
 * `propagator = external:node adapter/dist/echo_worker.js` (likewise for
 * detector/estimator).  Pass --bad-version to announce a wrong protocol
 * version, for handshake-failure testing.
 */

import { echoHandlers } from "./echo.js";
import { serve } from "./worker.js";

const badVersion = process.argv.includes("--bad-version");

serve(echoHandlers, badVersion ? { protocolVersion: 99 } : {}).catch((err) => {
  console.error(`echo worker failed: ${err}`);
  process.exit(1);
});
