/* tslint:disable */
/* eslint-disable */

/**
 * Generates a synthetic motor-imagery fixture and runs the full pipeline
 * on it, returning posteriors, separability and the top-edge graphs.
 */
export function explore_fixture(seed: bigint, snr: number, irrelevant_fraction: number, threshold: number, lambda: number, top_fraction: number): string;

/**
 * Magnitude response of a band-pass design as `[[hz, db], ...]`.
 */
export function filter_response(elliptic: boolean, order: number, low_hz: number, high_hz: number, fs: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly explore_fixture: (a: bigint, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly filter_response: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
