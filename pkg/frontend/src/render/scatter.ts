// WebGL2 point renderer. The p data columns upload once into a float
// texture; every frame the vertex shader reads a point's p values and
// dots them with the 2p-float basis uniform, so a basis update costs
// O(p) bytes and zero geometry re-uploads. Selection and colors live in
// separate per-point textures that update independently of geometry.

const MAX_DIMS = 64;
const TEX_WIDTH = 2048;

const VERTEX_SHADER = `#version 300 es
precision highp float;
precision highp sampler2D;

uniform sampler2D u_columns;   // p rows of ceil(n/TEX_W) x TEX_W texels
uniform sampler2D u_colors;    // per-point rgb
uniform sampler2D u_selection; // per-point 0/1
uniform float u_basis[${2 * MAX_DIMS}];
uniform int u_dims;
uniform int u_rowsPerColumn;
uniform vec4 u_viewport;       // cx, cy, halfSpan, pointSize
uniform float u_texWidth;

out vec4 v_color;

vec2 texelFor(int point) {
  int x = point % ${TEX_WIDTH};
  int y = point / ${TEX_WIDTH};
  return vec2(x, y);
}

void main() {
  int point = gl_VertexID;
  float px = 0.0;
  float py = 0.0;
  int x = point % ${TEX_WIDTH};
  int yBase = point / ${TEX_WIDTH};
  for (int j = 0; j < ${MAX_DIMS}; j++) {
    if (j >= u_dims) break;
    float v = texelFetch(u_columns, ivec2(x, yBase + j * u_rowsPerColumn), 0).r;
    px += v * u_basis[j];
    py += v * u_basis[u_dims + j];
  }
  vec2 ndc = vec2((px - u_viewport.x) / u_viewport.z, (py - u_viewport.y) / u_viewport.z);
  gl_Position = vec4(ndc, 0.0, 1.0);
  float selected = texelFetch(u_selection, ivec2(x, yBase), 0).r;
  vec3 rgb = texelFetch(u_colors, ivec2(x, yBase), 0).rgb;
  v_color = vec4(mix(rgb, vec3(1.0, 0.35, 0.1), selected * 0.85), selected > 0.5 ? 1.0 : 0.75);
  gl_PointSize = u_viewport.w * (1.0 + selected);
}
`;

const FRAGMENT_SHADER = `#version 300 es
precision mediump float;
in vec4 v_color;
out vec4 outColor;

void main() {
  vec2 d = gl_PointCoord - vec2(0.5);
  if (dot(d, d) > 0.25) discard;
  outColor = v_color;
}
`;

export { VERTEX_SHADER, FRAGMENT_SHADER, MAX_DIMS, TEX_WIDTH };

export class ScatterRenderer {
  private gl: WebGL2RenderingContext;
  private program: WebGLProgram;
  private nPoints = 0;
  private dims = 0;
  private rowsPerColumn = 0;
  private uniforms: Record<string, WebGLUniformLocation | null> = {};
  private basis = new Float32Array(2 * MAX_DIMS);
  private viewport: [number, number, number, number] = [0, 0, 1, 3];

  constructor(gl: WebGL2RenderingContext) {
    this.gl = gl;
    const ext = gl.getExtension("EXT_color_buffer_float");
    void ext;
    this.program = this.link(VERTEX_SHADER, FRAGMENT_SHADER);
    for (const name of [
      "u_columns",
      "u_colors",
      "u_selection",
      "u_basis",
      "u_dims",
      "u_rowsPerColumn",
      "u_viewport",
      "u_texWidth",
    ]) {
      this.uniforms[name] = gl.getUniformLocation(this.program, name);
    }
  }

  private link(vsSource: string, fsSource: string): WebGLProgram {
    const gl = this.gl;
    const compile = (type: number, source: string): WebGLShader => {
      const shader = gl.createShader(type);
      if (!shader) throw new Error("cannot create shader");
      gl.shaderSource(shader, source);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(gl.getShaderInfoLog(shader) ?? "shader compile failed");
      }
      return shader;
    };
    const program = gl.createProgram();
    if (!program) throw new Error("cannot create program");
    gl.attachShader(program, compile(gl.VERTEX_SHADER, vsSource));
    gl.attachShader(program, compile(gl.FRAGMENT_SHADER, fsSource));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(gl.getProgramInfoLog(program) ?? "program link failed");
    }
    return program;
  }

  /** One-time upload: p columns stacked into a single R32F texture. */
  uploadColumns(columns: Float32Array[]): void {
    const gl = this.gl;
    this.dims = columns.length;
    if (this.dims > MAX_DIMS) throw new Error(`at most ${MAX_DIMS} dims supported`);
    this.nPoints = columns[0].length;
    this.rowsPerColumn = Math.ceil(this.nPoints / TEX_WIDTH);
    const height = this.rowsPerColumn * this.dims;
    const data = new Float32Array(TEX_WIDTH * height);
    for (let j = 0; j < this.dims; j++) {
      data.set(columns[j], j * this.rowsPerColumn * TEX_WIDTH);
    }
    gl.activeTexture(gl.TEXTURE0);
    gl.bindTexture(gl.TEXTURE_2D, gl.createTexture());
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.texImage2D(gl.TEXTURE_2D, 0, gl.R32F, TEX_WIDTH, height, 0, gl.RED, gl.FLOAT, data);
    this.uploadColors(new Uint8Array(this.nPoints * 3).fill(110));
    this.uploadSelection(new Uint8Array(this.nPoints));
  }

  /** Selection updates touch only their own texture — no geometry upload. */
  uploadSelection(mask: Uint8Array): void {
    const gl = this.gl;
    const height = Math.ceil(this.nPoints / TEX_WIDTH);
    const data = new Uint8Array(TEX_WIDTH * height);
    data.set(mask);
    gl.activeTexture(gl.TEXTURE2);
    gl.bindTexture(gl.TEXTURE_2D, gl.createTexture());
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.texImage2D(gl.TEXTURE_2D, 0, gl.R8, TEX_WIDTH, height, 0, gl.RED, gl.UNSIGNED_BYTE, data);
  }

  uploadColors(rgb: Uint8Array): void {
    const gl = this.gl;
    const height = Math.ceil(this.nPoints / TEX_WIDTH);
    const data = new Uint8Array(TEX_WIDTH * height * 3);
    data.set(rgb);
    gl.activeTexture(gl.TEXTURE1);
    gl.bindTexture(gl.TEXTURE_2D, gl.createTexture());
    gl.pixelStorei(gl.UNPACK_ALIGNMENT, 1);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.texImage2D(gl.TEXTURE_2D, 0, gl.RGB8, TEX_WIDTH, height, 0, gl.RGB, gl.UNSIGNED_BYTE, data);
  }

  /** O(p) per frame: the basis is the only per-frame upload. */
  setBasis(basis: Float32Array): void {
    this.basis.fill(0);
    this.basis.set(basis.subarray(0, this.dims), 0);
    this.basis.set(basis.subarray(this.dims, 2 * this.dims), MAX_DIMS);
  }

  setViewport(cx: number, cy: number, halfSpan: number, pointSize: number): void {
    this.viewport = [cx, cy, halfSpan, pointSize];
  }

  draw(): void {
    const gl = this.gl;
    gl.useProgram(this.program);
    gl.clearColor(0.07, 0.07, 0.09, 1.0);
    gl.clear(gl.COLOR_BUFFER_BIT);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
    gl.uniform1i(this.uniforms.u_columns, 0);
    gl.uniform1i(this.uniforms.u_colors, 1);
    gl.uniform1i(this.uniforms.u_selection, 2);
    const packed = new Float32Array(2 * MAX_DIMS);
    packed.set(this.basis.subarray(0, this.dims), 0);
    packed.set(this.basis.subarray(MAX_DIMS, MAX_DIMS + this.dims), this.dims);
    gl.uniform1fv(this.uniforms.u_basis, packed);
    gl.uniform1i(this.uniforms.u_dims, this.dims);
    gl.uniform1i(this.uniforms.u_rowsPerColumn, this.rowsPerColumn);
    gl.uniform4f(this.uniforms.u_viewport, ...this.viewport);
    gl.uniform1f(this.uniforms.u_texWidth, TEX_WIDTH);
    gl.drawArrays(gl.POINTS, 0, this.nPoints);
  }
}
