'use strict';
// Loads the MiniZinc WebAssembly module shipped with the `minizinc` npm
// package and runs the driver's `main` against an in-memory file system.

const fs = require('node:fs');
const path = require('node:path');
const vm = require('node:vm');

const DIST = path.dirname(require.resolve('minizinc/minizinc.wasm'));
const WORKER_SRC = path.join(DIST, 'minizinc-worker.js');
const FACTORY_ANCHOR = 'i=e(t);let s=null;addEventListener(';

// Same defaults the browser worker installs: gecode is the default solver.
const PREFERENCES = {
  solverDefaults: [['org.minizinc.gecode_presolver', '--backend-flags', '--allow-unbounded-vars']],
  tagDefaults: [['', 'org.minizinc.gecode_presolver']],
};

function loadFactory() {
  const src = fs.readFileSync(WORKER_SRC, 'utf8');
  if (!src.includes(FACTORY_ANCHOR)) {
    throw new Error(`unsupported minizinc package layout: ${WORKER_SRC}`);
  }
  const patched = src.replace(FACTORY_ANCHOR, 'i=e(t);globalThis.__mznFactory=i;let s=null;addEventListener(');
  const ctx = {
    addEventListener: () => {},
    postMessage: () => {},
    console,
    process,
    require,
    module: {},
    exports: {},
    URL,
    TextDecoder,
    TextEncoder,
    WebAssembly,
    setTimeout,
    clearTimeout,
    Buffer,
    performance,
    __filename: WORKER_SRC,
    __dirname: DIST,
  };
  ctx.globalThis = ctx;
  ctx.self = ctx;
  vm.createContext(ctx);
  vm.runInContext(patched, ctx, { filename: WORKER_SRC });
  return ctx.__mznFactory;
}

class LineSink {
  constructor(emit) {
    this.emit = emit;
    this.bytes = [];
    this.decoder = new TextDecoder('utf-8');
  }
  push(byte) {
    if (byte === 0) return;
    this.bytes.push(byte);
    if (byte === 10) this.flush();
  }
  flush() {
    if (this.bytes.length === 0) return;
    const text = this.decoder.decode(new Uint8Array(this.bytes));
    this.bytes = [];
    this.emit(text);
  }
}

async function createEngine() {
  // emscripten reads process.argv when no explicit arguments are given
  const savedArgv = process.argv;
  process.argv = savedArgv.slice(0, 2);
  const factory = loadFactory();
  let sinks = { out: null, err: null };
  const mod = await factory({
    locateFile: (name, prefix) => {
      if (name === 'minizinc.wasm') return path.join(DIST, 'minizinc.wasm');
      if (name === 'minizinc.data') return path.join(DIST, 'minizinc.data');
      return prefix + name;
    },
    preRun: [
      (m) => {
        m.FS.init(
          null,
          (c) => sinks.out && sinks.out.push(c),
          (c) => sinks.err && sinks.err.push(c),
        );
        m.FS.mkdir('/minizinc');
        m.FS.mkdir('/home/web_user/.minizinc');
        m.FS.writeFile('/home/web_user/.minizinc/Preferences.json', JSON.stringify(PREFERENCES));
      },
    ],
    noInitialRun: true,
    noExitRuntime: true,
  });
  process.argv = savedArgv;

  // files: { name: content }, names are relative to the working directory.
  function run(files, args, onStdout, onStderr) {
    const out = new LineSink(onStdout);
    const err = new LineSink(onStderr);
    sinks = { out, err };
    const FS = mod.FS;
    FS.mount(FS.filesystems.MEMFS, null, '/minizinc');
    const prevCwd = FS.cwd();
    let code;
    try {
      for (const [name, content] of Object.entries(files)) {
        FS.writeFile('/minizinc/' + name, content);
      }
      FS.chdir('/minizinc');
      code = mod.callMain(args);
    } catch (e) {
      onStderr(`minizinc-wasm: ${e && e.message ? e.message : e}\n`);
      code = 1;
    } finally {
      out.flush();
      err.flush();
      FS.chdir(prevCwd);
      FS.unmount('/minizinc');
      sinks = { out: null, err: null };
    }
    return typeof code === 'number' ? code : 1;
  }

  return { run };
}

module.exports = { createEngine };
