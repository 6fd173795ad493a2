/* tslint:disable */
/* eslint-disable */

export function densityView(alpha: number, draws: number, seed: number): string;

export function lambdaView(p: number, alpha: number, r: number): string;

export function pathView(alpha: number, r: number, modes: number, amplitude: number, dt: number, seed: number): string;

/**
 * Admissible `r` range of the reaction–diffusion preset, for the page's slider.
 */
export function rRange(p: number, alpha: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly densityView: (a: number, b: number, c: number) => [number, number, number, number];
    readonly lambdaView: (a: number, b: number, c: number) => [number, number, number, number];
    readonly pathView: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly rRange: (a: number, b: number) => [number, number];
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
